#![allow(dead_code)]

/// `E[f(sd·N)]` for a standard normal `N`, by composite Simpson on `[-12, 12]`.
pub fn normal_expectation(f: impl Fn(f64) -> f64, sd: f64) -> f64 {
    const INTERVALS: usize = 24_000;
    let (a, b) = (-12.0f64, 12.0f64);
    let h = (b - a) / INTERVALS as f64;
    let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for i in 0..=INTERVALS {
        let u = a + h * i as f64;
        let w = if i == 0 || i == INTERVALS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * f(sd * u) * density(u);
    }
    s * h / 3.0
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
