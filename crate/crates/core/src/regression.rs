//! Least-squares projection on a polynomial basis of a scalar state.
//!
//! The basis is the probabilists' Hermite family `He_0..He_p` of the
//! standardized state. Normal equations are assembled block by block with
//! compensated sums and solved by Cholesky; when the Gram matrix is
//! numerically singular the degree is lowered until it factorizes.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::par::map_blocks;
use crate::paths::blocked_moments;
use crate::stats::NeumaierSum;
use crate::{Error, Result};

/// Relative pivot floor below which a Gram matrix counts as singular.
const PIVOT_FLOOR: f64 = 1e-10;

/// Evaluates `He_0(u)..He_p(u)` into `out` (length `p + 1`).
pub fn hermite_basis(u: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = u;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = u * out[k] - k as f64 * out[k - 1];
    }
}

/// A factorized regression design for one cross-section of states.
#[derive(Debug, Clone)]
pub struct Design {
    center: f64,
    scale: f64,
    degree: usize,
    requested: usize,
    /// False when all states coincide and only the constant is fitted.
    spread: bool,
    /// Lower Cholesky factor, row-major `(degree+1)²`.
    chol: Vec<f64>,
}

/// Fitted coefficients together with the standardization of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub scale: f64,
}

impl Projection {
    pub fn predict(&self, x: f64) -> f64 {
        let u = if self.coeffs.len() > 1 { (x - self.center) / self.scale } else { 0.0 };
        // Walk the Hermite recursion alongside the coefficients.
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c * cur;
            let next = u * cur - k as f64 * prev;
            prev = cur;
            cur = next;
        }
        acc
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

impl Design {
    /// Factorizes the normal equations of `x` on a basis of `degree`.
    pub fn new(x: &[f64], degree: usize) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Input("regression needs at least one sample".to_string()));
        }
        let mom = blocked_moments(x.len(), |i| x[i]);
        let center = mom.mean();
        let var = mom.sum_sq() / x.len() as f64 - center * center;
        let scale = libm::sqrt(var.max(0.0));
        let spread = scale > 1e-12 * (1.0 + center.abs()) && scale.is_finite();
        let mut p = if spread { degree.min(x.len().saturating_sub(1)) } else { 0 };
        loop {
            let design = Design {
                center,
                scale: if spread { scale } else { 1.0 },
                degree: p,
                requested: degree,
                spread,
                chol: Vec::new(),
            };
            let gram = design.gram(x);
            if let Some(chol) = cholesky(&gram, p + 1) {
                return Ok(Design { chol, ..design });
            }
            if p == 0 {
                return Err(Error::Input("regression design is singular".to_string()));
            }
            p -= 1;
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// True when the requested degree had to be lowered for a spread-out
    /// state (a degenerate state always fits the constant only).
    pub fn degraded(&self) -> bool {
        self.spread && self.degree < self.requested
    }

    fn standardize(&self, x: f64) -> f64 {
        if self.degree == 0 {
            0.0
        } else {
            (x - self.center) / self.scale
        }
    }

    fn gram(&self, x: &[f64]) -> Vec<f64> {
        let k = self.degree + 1;
        let parts = map_blocks(x.len(), |a, b| {
            let mut acc = vec![NeumaierSum::new(); k * k];
            let mut phi = vec![0.0; k];
            for &xi in &x[a..b] {
                hermite_basis(self.standardize(xi), &mut phi);
                for r in 0..k {
                    for c in 0..=r {
                        acc[r * k + c].add(phi[r] * phi[c]);
                    }
                }
            }
            acc
        });
        let mut total = vec![NeumaierSum::new(); k * k];
        for part in &parts {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        let mut g = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..=r {
                let v = total[r * k + c].total();
                g[r * k + c] = v;
                g[c * k + r] = v;
            }
        }
        g
    }

    /// Least-squares coefficients of `target(i)` on the basis at `x[i]`.
    pub fn fit<F: Fn(usize) -> f64 + Sync + Send>(&self, x: &[f64], target: F) -> Projection {
        let k = self.degree + 1;
        let parts = map_blocks(x.len(), |a, b| {
            let mut acc = vec![NeumaierSum::new(); k];
            let mut phi = vec![0.0; k];
            for (i, &xi) in (a..b).zip(&x[a..b]) {
                hermite_basis(self.standardize(xi), &mut phi);
                let y = target(i);
                for (s, p) in acc.iter_mut().zip(&phi) {
                    s.add(p * y);
                }
            }
            acc
        });
        let mut rhs = vec![NeumaierSum::new(); k];
        for part in &parts {
            for (t, p) in rhs.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        let rhs: Vec<f64> = rhs.iter().map(NeumaierSum::total).collect();
        Projection {
            coeffs: cholesky_solve(&self.chol, k, &rhs),
            center: self.center,
            scale: self.scale,
        }
    }

    /// Coefficient of determination of `proj` for `target` on `x`.
    pub fn r_squared<F: Fn(usize) -> f64 + Sync + Send>(
        &self,
        x: &[f64],
        target: F,
        proj: &Projection,
    ) -> f64 {
        let mom = blocked_moments(x.len(), &target);
        let ss_tot = mom.sum_sq() - mom.sum() * mom.mean();
        let ss_res = blocked_moments(x.len(), |i| target(i) - proj.predict(x[i])).sum_sq();
        if ss_tot <= 1e-300 * x.len() as f64 {
            1.0
        } else {
            1.0 - ss_res / ss_tot
        }
    }
}

fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= l[j * k + p] * l[j * k + p];
        }
        if !(d > PIVOT_FLOOR * a[j * k + j].abs()) || !d.is_finite() {
            return None;
        }
        let d = libm::sqrt(d);
        l[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * y[p];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in i + 1..k {
            s -= l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_recursion() {
        let mut h = [0.0; 5];
        hermite_basis(2.0, &mut h);
        assert_eq!(h, [1.0, 2.0, 3.0, 2.0, -5.0]);
    }

    #[test]
    fn recovers_polynomial_exactly() {
        let x: Vec<f64> = (0..500).map(|i| -3.0 + 6.0 * i as f64 / 499.0).collect();
        let d = Design::new(&x, 4).unwrap();
        let f = |v: f64| 1.0 - 2.0 * v + 0.5 * v * v * v;
        let proj = d.fit(&x, |i| f(x[i]));
        for &v in &[-2.5, 0.1, 2.9] {
            assert!((proj.predict(v) - f(v)).abs() < 1e-9);
        }
        assert!((d.r_squared(&x, |i| f(x[i]), &proj) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_state_falls_back_to_mean() {
        let x = [0.0; 10];
        let d = Design::new(&x, 4).unwrap();
        assert_eq!(d.degree(), 0);
        let proj = d.fit(&x, |i| i as f64);
        assert!((proj.predict(0.0) - 4.5).abs() < 1e-15);
    }

    #[test]
    fn few_distinct_values_degrade_degree() {
        let x: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let d = Design::new(&x, 4).unwrap();
        assert_eq!(d.degree(), 1);
        assert!(d.degraded());
    }
}
