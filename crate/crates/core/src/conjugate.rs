//! Discrete Fenchel–Legendre transform, subdifferentials and the
//! Fenchel–Young / biconjugate checks.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{CoreFunction, Generator};
use crate::vector::{dot, norm};
use crate::{Error, ExtendedReal, Result};

/// A convex function sampled on a strictly increasing axis. When `radial`,
/// the axis is `r = |x| ≥ 0` and the function is `x ↦ φ(|x|)` in any
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedConvexFunction {
    axis: Vec<f64>,
    values: Vec<ExtendedReal>,
    radial: bool,
}

impl TabulatedConvexFunction {
    pub fn new(axis: Vec<f64>, values: Vec<ExtendedReal>, radial: bool) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::Grid(alloc::format!(
                "axis has {} points but {} values were given",
                axis.len(),
                values.len()
            )));
        }
        check_axis(&axis, 2)?;
        if radial && axis[0] < 0.0 {
            return Err(Error::Grid("a radial axis must be nonnegative".to_string()));
        }
        if values.iter().any(|v| matches!(v, ExtendedReal::Finite(x) if !x.is_finite())) {
            return Err(Error::Input("table values must be finite or +inf".to_string()));
        }
        if values.iter().filter(|v| v.is_finite()).count() < 3 {
            return Err(Error::Domain(
                "a tabulated function needs at least 3 finite values".to_string(),
            ));
        }
        Ok(Self { axis, values, radial })
    }

    /// Samples `f` on `axis`.
    pub fn from_fn(axis: Vec<f64>, radial: bool, f: impl Fn(f64) -> ExtendedReal) -> Result<Self> {
        let values = axis.iter().map(|&x| f(x)).collect();
        Self::new(axis, values, radial)
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn values(&self) -> &[ExtendedReal] {
        &self.values
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    /// Smallest and largest axis value with a finite entry.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let lo = self.values.iter().position(|v| v.is_finite())?;
        let hi = self.values.iter().rposition(|v| v.is_finite())?;
        Some((self.axis[lo], self.axis[hi]))
    }

    fn coordinate(&self, x: &[f64]) -> f64 {
        if self.radial {
            norm(x)
        } else {
            x[0]
        }
    }

    /// Piecewise-linear interpolation at a vector argument.
    pub fn eval_point(&self, x: &[f64]) -> Result<ExtendedReal> {
        if !self.radial && x.len() != 1 {
            return Err(Error::Grid(
                "a one-dimensional table cannot be evaluated at a vector".to_string(),
            ));
        }
        self.eval(self.coordinate(x))
    }

    /// Piecewise-linear interpolation along the axis. A segment with an
    /// infinite endpoint is infinite in its interior.
    pub fn eval(&self, s: f64) -> Result<ExtendedReal> {
        let (lo, hi) = (self.axis[0], self.axis[self.axis.len() - 1]);
        if !(s >= lo && s <= hi) {
            return Err(Error::Range { value: s, lo, hi });
        }
        if self.axis.len() == 1 {
            return Ok(self.values[0]);
        }
        let j = self.segment(s);
        let (a, b) = (self.axis[j], self.axis[j + 1]);
        if s == a {
            return Ok(self.values[j]);
        }
        if s == b {
            return Ok(self.values[j + 1]);
        }
        match (self.values[j], self.values[j + 1]) {
            (ExtendedReal::Finite(u), ExtendedReal::Finite(v)) => {
                let w = (s - a) / (b - a);
                Ok(ExtendedReal::Finite(u + w * (v - u)))
            }
            _ => Ok(ExtendedReal::PosInfinity),
        }
    }

    /// Index `j` with `axis[j] ≤ s ≤ axis[j+1]`.
    fn segment(&self, s: f64) -> usize {
        let n = self.axis.len();
        let j = self.axis.partition_point(|&a| a <= s);
        j.saturating_sub(1).min(n - 2)
    }

    fn slope(&self, j: usize) -> Option<f64> {
        match (self.values[j], self.values[j + 1]) {
            (ExtendedReal::Finite(u), ExtendedReal::Finite(v)) => {
                Some((v - u) / (self.axis[j + 1] - self.axis[j]))
            }
            _ => None,
        }
    }

    /// One-sided slopes `(left, right)` along the axis at `s`. At a node both
    /// neighbouring segments are used; at the ends of the table the missing
    /// side copies the available one.
    pub fn one_sided_slopes(&self, s: f64) -> Result<(f64, f64)> {
        self.eval(s)?;
        let n = self.axis.len();
        if n < 2 {
            return Err(Error::Domain(alloc::format!("no finite slope at {s}")));
        }
        let j = self.segment(s);
        let missing = || Error::Domain(alloc::format!("no finite slope at {s}"));
        let (left, right) = if s == self.axis[j] && j > 0 {
            (self.slope(j - 1), self.slope(j))
        } else if s == self.axis[j + 1] && j + 1 < n - 1 {
            (self.slope(j), self.slope(j + 1))
        } else {
            (self.slope(j), self.slope(j))
        };
        match (left, right) {
            (Some(l), Some(r)) => Ok((l, r)),
            (Some(l), None) => Ok((l, l)),
            (None, Some(r)) => Ok((r, r)),
            (None, None) => Err(missing()),
        }
    }

    /// Subdifferential at a vector argument, built from one-sided slopes.
    pub fn subdifferential(&self, x: &[f64]) -> Result<Subdifferential> {
        if !self.radial {
            if x.len() != 1 {
                return Err(Error::Grid(
                    "a one-dimensional table cannot be evaluated at a vector".to_string(),
                ));
            }
            let (lo, hi) = self.one_sided_slopes(x[0])?;
            return Ok(if lo == hi {
                Subdifferential::Singleton(vec![lo])
            } else {
                Subdifferential::Interval { lo: lo.min(hi), hi: lo.max(hi) }
            });
        }
        let r = norm(x);
        let (lo, hi) = self.one_sided_slopes(r)?;
        if r == 0.0 {
            // A convex radial profile has a ball of radius φ'(0+) at the origin.
            return Ok(Subdifferential::Ball { radius: hi.max(0.0) });
        }
        let unit: Vec<f64> = x.iter().map(|v| v / r).collect();
        Ok(if lo == hi {
            Subdifferential::Singleton(unit.iter().map(|u| u * lo).collect())
        } else {
            Subdifferential::Ray { direction: unit, lo: lo.min(hi), hi: lo.max(hi) }
        })
    }

    /// Indices of the finite points on the lower convex hull, in axis order.
    pub fn lower_hull(&self) -> Vec<usize> {
        let mut hull: Vec<usize> = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            let ExtendedReal::Finite(y) = *v else { continue };
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                let (xa, ya) = (self.axis[a], self.values[a].to_f64());
                let (xb, yb) = (self.axis[b], self.values[b].to_f64());
                let xi = self.axis[i];
                // Drop b when it lies on or above the chord from a to i.
                if (yb - ya) * (xi - xa) >= (y - ya) * (xb - xa) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }
        hull
    }

    /// Largest amount by which a finite table value exceeds the lower convex
    /// hull; zero for a discretely convex table.
    pub fn convexity_defect(&self) -> f64 {
        let hull = self.lower_hull();
        let mut worst = 0.0f64;
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (xa, ya) = (self.axis[a], self.values[a].to_f64());
            let (xb, yb) = (self.axis[b], self.values[b].to_f64());
            for j in a + 1..b {
                if let ExtendedReal::Finite(y) = self.values[j] {
                    let chord = ya + (yb - ya) * (self.axis[j] - xa) / (xb - xa);
                    worst = worst.max(y - chord);
                }
            }
        }
        worst
    }
}

fn check_axis(axis: &[f64], min_len: usize) -> Result<()> {
    if axis.len() < min_len {
        return Err(Error::Grid(alloc::format!("a grid needs at least {min_len} points")));
    }
    if axis.iter().any(|x| !x.is_finite()) {
        return Err(Error::Grid("grid coordinates must be finite".to_string()));
    }
    if let Some(w) = axis.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Grid(alloc::format!(
            "grid not strictly increasing at {} -> {}",
            w[0],
            w[1]
        )));
    }
    Ok(())
}

/// Result of a discrete transform.
#[derive(Debug, Clone)]
pub struct ConjugateTable {
    pub table: TabulatedConvexFunction,
    /// Index into the source axis of the maximiser for each output point.
    pub argmax: Vec<usize>,
    /// True where the maximiser sits on the boundary of the source grid, so
    /// the value may be an underestimate of the true conjugate.
    pub extrapolated: Vec<bool>,
    /// Convexity defect of the source before hull repair.
    pub convexity_defect: f64,
}

/// `out[i] = max_j (z_i·q_j − f(q_j))` over finite source points.
///
/// Radial sources are transformed as profiles: the value at `z` uses `|z|`.
/// The output is radial when the source is and `z_grid` is nonnegative.
pub fn legendre_transform(src: &TabulatedConvexFunction, z_grid: &[f64]) -> Result<ConjugateTable> {
    check_axis(z_grid, 1)?;
    let hull = src.lower_hull();
    if hull.is_empty() {
        return Err(Error::Domain("empty effective domain".to_string()));
    }
    let n_src = src.axis.len();
    let slopes: Vec<f64> = hull
        .windows(2)
        .map(|w| {
            (src.values[w[1]].to_f64() - src.values[w[0]].to_f64())
                / (src.axis[w[1]] - src.axis[w[0]])
        })
        .collect();
    let m = z_grid.len();
    let mut values = vec![0.0; m];
    let mut argmax = vec![0usize; m];
    let mut extrapolated = vec![false; m];

    let mut fill = |order: &mut dyn Iterator<Item = usize>| {
        // Queries arrive with nondecreasing coordinate, so the hull pointer
        // only moves forward.
        let mut k = 0usize;
        for i in order {
            let v = if src.radial { z_grid[i].abs() } else { z_grid[i] };
            while k < slopes.len() && v > slopes[k] {
                k += 1;
            }
            let j = hull[k];
            values[i] = v * src.axis[j] - src.values[j].to_f64();
            argmax[i] = j;
            let lower_edge = j == 0 && !src.radial;
            extrapolated[i] = (lower_edge || j == n_src - 1) && src.values[j].is_finite();
        }
    };
    if src.radial {
        let split = z_grid.partition_point(|&z| z < 0.0);
        fill(&mut (0..split).rev());
        fill(&mut (split..m));
    } else {
        fill(&mut (0..m));
    }

    let radial_out = src.radial && z_grid[0] >= 0.0;
    let table = TabulatedConvexFunction {
        axis: z_grid.to_vec(),
        values: values.into_iter().map(ExtendedReal::Finite).collect(),
        radial: radial_out,
    };
    Ok(ConjugateTable {
        table,
        argmax,
        extrapolated,
        convexity_defect: src.convexity_defect(),
    })
}

/// Outcome of comparing a core function with its numerical biconjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct BiconjugateReport {
    pub max_deviation: f64,
    /// Grid coordinate where the maximum deviation occurs.
    pub location: f64,
    pub compared: usize,
    /// Interior points skipped because the second transform's maximiser sat
    /// on the edge of the `z` grid.
    pub skipped_extrapolated: usize,
    pub within_tolerance: bool,
}

/// Compares `f` with `f**` computed through `z_grid`, at interior points of
/// `q_grid` where `f` is finite.
pub fn biconjugate_check(
    core: &CoreFunction,
    q_grid: &[f64],
    z_grid: &[f64],
    tol: f64,
) -> Result<BiconjugateReport> {
    let f = core.tabulate(0.0, q_grid)?;
    let g = legendre_transform(&f, z_grid)?;
    let g_table = if f.radial && !g.table.radial {
        // Fold back onto the nonnegative half to keep the second pass radial.
        let start = z_grid.partition_point(|&z| z < 0.0);
        TabulatedConvexFunction::new(
            z_grid[start..].to_vec(),
            g.table.values[start..].to_vec(),
            true,
        )?
    } else {
        g.table
    };
    let ff = legendre_transform(&g_table, q_grid)?;
    let mut report = BiconjugateReport {
        max_deviation: 0.0,
        location: f64::NAN,
        compared: 0,
        skipped_extrapolated: 0,
        within_tolerance: true,
    };
    let interior = q_grid.len() - 1;
    for (i, &q) in q_grid.iter().enumerate().take(interior).skip(1) {
        let ExtendedReal::Finite(fv) = f.values[i] else { continue };
        if ff.extrapolated[i] {
            report.skipped_extrapolated += 1;
            continue;
        }
        report.compared += 1;
        let dev = (ff.table.values[i].to_f64() - fv).abs();
        if dev > report.max_deviation || report.location.is_nan() {
            report.max_deviation = report.max_deviation.max(dev);
            report.location = q;
        }
    }
    report.within_tolerance = report.max_deviation <= tol;
    Ok(report)
}

/// Set-valued subdifferential with its minimal-norm selection.
#[derive(Debug, Clone, PartialEq)]
pub enum Subdifferential {
    Singleton(Vec<f64>),
    /// One-dimensional interval `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Closed ball of the given radius centred at the origin.
    Ball { radius: f64 },
    /// `{s·direction : s ∈ [lo, hi]}` for a unit `direction`.
    Ray { direction: Vec<f64>, lo: f64, hi: f64 },
}

impl Subdifferential {
    /// The element of smallest Euclidean norm.
    pub fn min_norm(&self) -> Vec<f64> {
        match self {
            Subdifferential::Singleton(v) => v.clone(),
            Subdifferential::Interval { lo, hi } => vec![clamp_zero(*lo, *hi)],
            Subdifferential::Ball { .. } => vec![0.0],
            Subdifferential::Ray { direction, lo, hi } => {
                let s = clamp_zero(*lo, *hi);
                direction.iter().map(|d| d * s).collect()
            }
        }
    }

    /// Minimal-norm element written into `out` (dimension of the caller).
    pub fn min_norm_into(&self, out: &mut [f64]) {
        match self {
            Subdifferential::Ball { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            other => out.copy_from_slice(&other.min_norm()),
        }
    }

    pub fn contains(&self, q: &[f64], tol: f64) -> bool {
        match self {
            Subdifferential::Singleton(v) => {
                v.iter().zip(q).all(|(a, b)| (a - b).abs() <= tol)
            }
            Subdifferential::Interval { lo, hi } => q[0] >= lo - tol && q[0] <= hi + tol,
            Subdifferential::Ball { radius } => norm(q) <= radius + tol,
            Subdifferential::Ray { direction, lo, hi } => {
                let s = dot(direction, q);
                let off: f64 = direction
                    .iter()
                    .zip(q)
                    .map(|(d, x)| (x - s * d) * (x - s * d))
                    .sum();
                libm::sqrt(off) <= tol && s >= lo - tol && s <= hi + tol
            }
        }
    }
}

fn clamp_zero(lo: f64, hi: f64) -> f64 {
    0.0f64.max(lo).min(hi)
}

/// `∂g(t, z)` with its minimal-norm element.
pub fn subgradient(gen: &Generator, _t: f64, z: &[f64]) -> Result<(Subdifferential, Vec<f64>)> {
    let set = gen.subdifferential(z)?;
    let mut sel = vec![0.0; z.len()];
    set.min_norm_into(&mut sel);
    Ok((set, sel))
}

/// `f(t,q) + g(t,z) − z·q`, which is `+∞` when `q` is outside the effective
/// domain of `f`.
pub fn fenchel_young_gap(
    core: &CoreFunction,
    gen: &Generator,
    t: f64,
    q: &[f64],
    z: &[f64],
) -> Result<ExtendedReal> {
    let g = gen.try_eval(t, z)?;
    Ok(core.eval(t, q).add_finite(g - dot(z, q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_catalogue_entry, CatalogueTag, GrowthParams, OffsetFn};

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn finite(axis: &[f64], f: impl Fn(f64) -> f64) -> TabulatedConvexFunction {
        TabulatedConvexFunction::from_fn(axis.to_vec(), false, |x| ExtendedReal::Finite(f(x)))
            .unwrap()
    }

    #[test]
    fn self_conjugate_quadratic() {
        let src = finite(&linspace(-5.0, 5.0, 401), |q| 0.5 * q * q);
        let out = legendre_transform(&src, &[1.0]).unwrap();
        assert!((out.table.values()[0].to_f64() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_small_slope_gives_minus_one() {
        let src = finite(&linspace(-6.0, 6.0, 12001), |q| q.abs().exp());
        let out = legendre_transform(&src, &[0.5]).unwrap();
        assert!((out.table.values()[0].to_f64() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_vii_numeric() {
        let (f, _) = build_catalogue_entry(
            CatalogueTag::PiecewiseVii,
            &GrowthParams::default(),
            OffsetFn::zero(),
        )
        .unwrap();
        let tab = f.tabulate(0.0, &linspace(-5.0, 5.0, 1001)).unwrap();
        let out = legendre_transform(&tab, &[1.5]).unwrap();
        assert!((out.table.values()[0].to_f64() - 2.25).abs() < 1e-9);
        assert!(!out.extrapolated[0]);
    }

    #[test]
    fn range_and_grid_errors() {
        let t = finite(&[0.0, 1.0, 2.0], |x| x * x);
        assert!(matches!(t.eval(2.5), Err(Error::Range { .. })));
        assert!(matches!(
            legendre_transform(&t, &[1.0, 0.5]),
            Err(Error::Grid(_))
        ));
        let empty = TabulatedConvexFunction::new(
            vec![0.0, 1.0, 2.0],
            vec![ExtendedReal::PosInfinity; 3],
            false,
        );
        assert!(matches!(empty, Err(Error::Domain(_))));
    }

    #[test]
    fn hull_repairs_and_reports_defect() {
        let t = TabulatedConvexFunction::new(
            vec![0.0, 1.0, 2.0, 3.0],
            [0.0, 2.0, 1.0, 3.0].map(ExtendedReal::Finite).to_vec(),
            false,
        )
        .unwrap();
        assert_eq!(t.lower_hull(), vec![0, 2, 3]);
        assert!((t.convexity_defect() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn tabulated_subdifferential_at_node() {
        let t = finite(&linspace(-2.0, 2.0, 5), |x| x.abs());
        assert_eq!(
            t.subdifferential(&[0.0]).unwrap(),
            Subdifferential::Interval { lo: -1.0, hi: 1.0 }
        );
        assert_eq!(t.subdifferential(&[0.0]).unwrap().min_norm(), vec![0.0]);
        assert_eq!(t.subdifferential(&[1.5]).unwrap(), Subdifferential::Singleton(vec![1.0]));
        assert!(matches!(t.subdifferential(&[3.0]), Err(Error::Range { .. })));
    }

    #[test]
    fn fenchel_young_examples() {
        let (f, g) =
            build_catalogue_entry(CatalogueTag::Entropic, &GrowthParams::default(), OffsetFn::zero())
                .unwrap();
        assert_eq!(fenchel_young_gap(&f, &g, 0.0, &[3.0], &[2.0]).unwrap(), ExtendedReal::Finite(0.5));
        assert_eq!(fenchel_young_gap(&f, &g, 0.0, &[2.0], &[2.0]).unwrap(), ExtendedReal::Finite(0.0));
        let (f, g) = build_catalogue_entry(
            CatalogueTag::PiecewiseVii,
            &GrowthParams::default(),
            OffsetFn::zero(),
        )
        .unwrap();
        assert_eq!(fenchel_young_gap(&f, &g, 0.0, &[1.5], &[1.0]).unwrap(), ExtendedReal::Finite(0.0));
        assert_eq!(
            fenchel_young_gap(&f, &g, 0.0, &[0.5], &[1.0]).unwrap(),
            ExtendedReal::PosInfinity
        );
    }

    #[test]
    fn subgradient_selections() {
        let (_, g) =
            build_catalogue_entry(CatalogueTag::Entropic, &GrowthParams::default(), OffsetFn::zero())
                .unwrap();
        let (set, sel) = subgradient(&g, 0.0, &[2.0]).unwrap();
        assert_eq!(set, Subdifferential::Singleton(vec![2.0]));
        assert_eq!(sel, vec![2.0]);
    }

    #[test]
    fn drift_band_biconjugate_is_zero_in_band() {
        let p = GrowthParams { gamma: 1.0, ..GrowthParams::default() };
        let (f, _) = build_catalogue_entry(CatalogueTag::DriftBand, &p, OffsetFn::zero()).unwrap();
        let r = biconjugate_check(&f, &linspace(-5.0, 5.0, 1001), &linspace(-5.0, 5.0, 1001), 1e-12)
            .unwrap();
        assert!(r.within_tolerance, "{r:?}");
        assert!(r.compared > 0);
    }

    #[test]
    fn radial_transform_handles_negative_queries() {
        let src = TabulatedConvexFunction::from_fn(linspace(0.0, 5.0, 501), true, |r| {
            ExtendedReal::Finite(0.5 * r * r)
        })
        .unwrap();
        let out = legendre_transform(&src, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let v: Vec<f64> = out.table.values().iter().map(|v| v.to_f64()).collect();
        for (a, b) in v.iter().zip([2.0, 0.5, 0.0, 0.5, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!out.table.is_radial());
    }
}
