//! Exactly rounded floating-point summation (Shewchuk partials, as in
//! CPython's `math.fsum`). The result is the correctly rounded value of the
//! exact real sum, so it is independent of summation order and of how the
//! inputs were split across partial accumulators. The estimator relies on
//! this for bitwise permutation invariance and dataset-merge linearity.

use crate::num::Real;

/// Running exact sum. `value()` returns the correctly rounded total.
#[derive(Debug, Clone)]
pub struct ExactSum<R> {
    partials: Vec<R>,
}

impl<R: Real> Default for ExactSum<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> ExactSum<R> {
    pub fn new() -> Self {
        ExactSum {
            partials: Vec::with_capacity(8),
        }
    }

    pub fn add(&mut self, mut x: R) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != R::zero() {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Folds another accumulator into this one; exactness is preserved.
    pub fn merge(&mut self, other: &ExactSum<R>) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded total, including the halfway-case fixup from
    /// CPython's fsum.
    pub fn value(&self) -> R {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return R::zero();
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = R::zero();
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != R::zero() {
                break;
            }
        }
        if n > 0 && ((lo < R::zero() && p[n - 1] < R::zero()) || (lo > R::zero() && p[n - 1] > R::zero())) {
            let y = lo + lo;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Exact sum of a slice.
pub fn exact_sum<R: Real>(values: &[R]) -> R {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ill_conditioned_sum() {
        // 1 + 1e100 + 1 - 1e100 = 2 exactly.
        let v = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(exact_sum(&v), 2.0);
    }

    #[test]
    fn order_invariant() {
        let mut v: Vec<f64> = (0..2000)
            .map(|i| ((i * 2654435761u64 as usize) as f64).sin() * 10f64.powi((i % 30) as i32 - 15))
            .collect();
        let a = exact_sum(&v);
        v.reverse();
        let b = exact_sum(&v);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn merge_matches_concatenation() {
        let v: Vec<f64> = (0..999).map(|i| (i as f64 * 0.7).cos() * 1e3).collect();
        let whole = exact_sum(&v);
        let mut a = ExactSum::new();
        for &x in &v[..300] {
            a.add(x);
        }
        let mut b = ExactSum::new();
        for &x in &v[300..] {
            b.add(x);
        }
        a.merge(&b);
        assert_eq!(whole.to_bits(), a.value().to_bits());
    }

    #[test]
    fn works_in_f32() {
        let v = [1.0f32, 16777216.0, 1.0, -16777216.0];
        assert_eq!(exact_sum(&v), 2.0f32);
    }
}
