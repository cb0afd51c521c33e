//! Compensated summation and sample moments.
//!
//! Every reduction in the crate goes through [`NeumaierSum`] so that means of
//! identical values are exact to the last ulp and results do not depend on how
//! work was split across threads.

/// Neumaier's improved Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum in, keeping both compensation terms.
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.total()
}

/// Running first and second moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: usize,
    s1: NeumaierSum,
    s2: NeumaierSum,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.s1.merge(&other.s1);
        self.s2.merge(&other.s2);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn sum(&self) -> f64 {
        self.s1.total()
    }

    pub fn sum_sq(&self) -> f64 {
        self.s2.total()
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.s1.total() / self.n as f64
    }

    /// Unbiased sample variance (zero for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        let v = (self.s2.total() - n * mean * mean) / (n - 1.0);
        v.max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        libm::sqrt(self.variance() / self.n as f64)
    }
}

pub fn moments(xs: &[f64]) -> Moments {
    let mut m = Moments::new();
    for &x in xs {
        m.push(x);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_identical_values_is_exact() {
        let xs = alloc::vec![core::f64::consts::LN_2; 200_000];
        assert_eq!(moments(&xs).mean(), core::f64::consts::LN_2);
    }

    #[test]
    fn compensation_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(sum(&xs), 1.0);
    }

    #[test]
    fn variance_of_small_sample() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
    }
}
