use alloc::vec;
use alloc::vec::Vec;

use super::{CoreClass, CoreFunction, Generator, GeneratorClass};
use crate::vector::norm;
use crate::ExtendedReal;

/// A sample point `(t, x)` where `x` is a `q` or `z` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl GridPoint {
    /// `n` evenly spaced points along the first axis of `R^dim` on
    /// `[lo, hi]`, repeated for each time in `times`.
    pub fn axis(times: &[f64], lo: f64, hi: f64, n: usize, dim: usize) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(times.len() * n);
        for &t in times {
            for i in 0..n {
                let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                let mut x = vec![0.0; dim];
                x[0] = lo + (hi - lo) * s;
                out.push(GridPoint { t, x });
            }
        }
        out
    }
}

/// Which inequality a grid point failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `|g| ≤ h̄ + growth(|z|)` for the declared generator class.
    GeneratorUpper,
    /// `g(z) ≥ −k|z| − h`.
    GeneratorLinearLower,
    /// Lower growth of the declared core class.
    CoreLower,
    /// `f = +∞` outside the ball of radius `γ` (class A4).
    CoreDomain,
    /// `f(t, q̄) ≤ h(t)`.
    Anchor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFailure {
    pub kind: BoundKind,
    pub t: f64,
    pub x: Vec<f64>,
    /// Value of the checked function (`+∞` as `f64::INFINITY`).
    pub value: f64,
    /// The bound it had to respect.
    pub limit: f64,
    /// How far past the bound the value lies.
    pub excess: f64,
}

/// Grid certificate: an empty failure list means every point passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthReport {
    pub checked: usize,
    pub failures: Vec<GrowthFailure>,
}

impl GrowthReport {
    pub fn certified(&self) -> bool {
        self.failures.is_empty()
    }

    /// Largest excess over all failures, or 0 when certified.
    pub fn worst_excess(&self) -> f64 {
        self.failures.iter().map(|f| f.excess).fold(0.0, f64::max)
    }
}

/// Objects whose declared growth class can be checked on a grid.
pub trait GrowthCheck {
    fn growth_report(&self, grid: &[GridPoint], tol: f64) -> GrowthReport;
}

/// Checks the declared growth bounds of `obj` at every grid point.
pub fn check_growth<T: GrowthCheck + ?Sized>(obj: &T, grid: &[GridPoint], tol: f64) -> GrowthReport {
    obj.growth_report(grid, tol)
}

impl GrowthCheck for Generator {
    fn growth_report(&self, grid: &[GridPoint], tol: f64) -> GrowthReport {
        let p = self.params();
        let upper = |r: f64| -> Option<f64> {
            match self.class() {
                GeneratorClass::H1 => Some(0.5 * p.gamma * r * r),
                GeneratorClass::H2 => Some(p.gamma * libm::pow(r, p.alpha)),
                GeneratorClass::H3 => Some(
                    p.gamma * r * libm::pow(libm::log(core::f64::consts::E + r), p.lambda),
                ),
                GeneratorClass::H4 => Some(p.gamma * r),
                GeneratorClass::Unclassified => None,
            }
        };
        let mut report = GrowthReport::default();
        for pt in grid {
            report.checked += 1;
            let value = self.eval(pt.t, &pt.x);
            let r = norm(&pt.x);
            if let Some(growth) = upper(r) {
                let limit = self.hbar().eval(pt.t) + growth;
                let excess = value.abs() - limit;
                if !(excess <= tol) {
                    report.failures.push(GrowthFailure {
                        kind: BoundKind::GeneratorUpper,
                        t: pt.t,
                        x: pt.x.clone(),
                        value,
                        limit,
                        excess,
                    });
                }
            }
            let floor = -p.k * r - self.h().eval(pt.t);
            let excess = floor - value;
            if !(excess <= tol) {
                report.failures.push(GrowthFailure {
                    kind: BoundKind::GeneratorLinearLower,
                    t: pt.t,
                    x: pt.x.clone(),
                    value,
                    limit: floor,
                    excess,
                });
            }
        }
        report
    }
}

impl GrowthCheck for CoreFunction {
    fn growth_report(&self, grid: &[GridPoint], tol: f64) -> GrowthReport {
        let p = self.params();
        let mut report = GrowthReport::default();
        let mut anchor_times: Vec<f64> = Vec::new();
        for pt in grid {
            report.checked += 1;
            let h = self.h().eval(pt.t);
            let value = self.eval(pt.t, &pt.x);
            let r = norm(&pt.x);
            let lower = match self.class() {
                CoreClass::A1 => Some(r * r / (2.0 * p.gamma)),
                CoreClass::A2 => Some(
                    libm::pow(p.gamma, -1.0 / (p.alpha - 1.0)) * libm::pow(r, p.alpha_star()),
                ),
                CoreClass::A3 => Some(
                    p.c * libm::exp(
                        2.0 * libm::pow(p.gamma, -1.0 / p.lambda) * libm::pow(r, 1.0 / p.lambda),
                    ),
                ),
                CoreClass::A4 => Some(0.0),
                CoreClass::Unclassified => None,
            };
            if let (Some(lower), ExtendedReal::Finite(v)) = (lower, value) {
                let limit = lower - h;
                let excess = limit - v;
                if !(excess <= tol) {
                    report.failures.push(GrowthFailure {
                        kind: BoundKind::CoreLower,
                        t: pt.t,
                        x: pt.x.clone(),
                        value: v,
                        limit,
                        excess,
                    });
                }
            }
            if self.class() == CoreClass::A4 && r > p.gamma * (1.0 + 1e-12) && value.is_finite() {
                report.failures.push(GrowthFailure {
                    kind: BoundKind::CoreDomain,
                    t: pt.t,
                    x: pt.x.clone(),
                    value: value.to_f64(),
                    limit: f64::INFINITY,
                    excess: f64::INFINITY,
                });
            }
            if !anchor_times.contains(&pt.t) {
                anchor_times.push(pt.t);
                let v = self.eval(pt.t, self.anchor()).to_f64();
                let excess = v - h;
                if !(excess <= tol) {
                    report.failures.push(GrowthFailure {
                        kind: BoundKind::Anchor,
                        t: pt.t,
                        x: self.anchor().to_vec(),
                        value: v,
                        limit: h,
                        excess,
                    });
                }
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_catalogue_entry, CatalogueTag, GrowthParams, OffsetFn};

    fn grid(lo: f64, hi: f64) -> Vec<GridPoint> {
        GridPoint::axis(&[0.0, 0.5], lo, hi, 2001, 1)
    }

    #[test]
    fn entropic_generator_certified() {
        let (_, g) = build_catalogue_entry(
            CatalogueTag::Entropic,
            &GrowthParams::default(),
            OffsetFn::zero(),
        )
        .unwrap();
        let r = check_growth(&g, &grid(-10.0, 10.0), 1e-12);
        assert!(r.certified(), "{:?}", r.failures.first());
        assert_eq!(r.checked, 4002);
    }

    #[test]
    fn piecewise_vii_generator_meets_linear_floor_with_equality() {
        let (_, g) = build_catalogue_entry(
            CatalogueTag::PiecewiseVii,
            &GrowthParams { k: 1.0, ..GrowthParams::default() },
            OffsetFn::zero(),
        )
        .unwrap();
        assert_eq!(g.eval(0.0, &[-2.0]), -2.0);
        assert!(check_growth(&g, &grid(-10.0, 10.0), 1e-12).certified());
        assert!((g.hbar().eval(0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn piecewise_vii_core_lower_bound_gap_is_reported() {
        let (f, _) = build_catalogue_entry(
            CatalogueTag::PiecewiseVii,
            &GrowthParams::default(),
            OffsetFn::zero(),
        )
        .unwrap();
        let r = check_growth(&f, &grid(-5.0, 5.0), 1e-12);
        assert!(!r.certified());
        assert!(r.failures.iter().all(|x| x.kind == BoundKind::CoreLower));
        assert!((r.worst_excess() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn catalogue_generators_certified() {
        for tag in CatalogueTag::ALL {
            let p = GrowthParams { gamma: 1.5, k: 0.5, ..GrowthParams::default() };
            let (f, g) = build_catalogue_entry(tag, &p, OffsetFn::constant(0.3)).unwrap();
            let r = check_growth(&g, &grid(-10.0, 10.0), 1e-9);
            assert!(r.certified(), "{tag}: {:?}", r.failures.first());
            let r = check_growth(&f, &grid(-10.0, 10.0), 1e-9);
            if tag != CatalogueTag::PiecewiseVii {
                assert!(r.certified(), "{tag}: {:?}", r.failures.first());
            }
        }
    }

    #[test]
    fn capped_quadratic_tail_within_linear_bound() {
        let (_, g) = build_catalogue_entry(
            CatalogueTag::CappedQuadratic,
            &GrowthParams { gamma: 1.0, ..GrowthParams::default() },
            OffsetFn::zero(),
        )
        .unwrap();
        assert_eq!(g.eval(0.0, &[3.0]), 2.5);
        assert!(check_growth(&g, &grid(1.0, 50.0), 0.0).certified());
    }
}
