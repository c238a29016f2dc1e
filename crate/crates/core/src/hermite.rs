//! Hermite polynomials with leading coefficient `1/q!`:
//! `H_0 = 1`, `H_1(x) = x`, `H_2(x) = (x^2 - 1)/2`, ...
//!
//! `q! * H_q` is the probabilists' polynomial; it is never exposed here.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("Hermite order {q} exceeds evaluator maximum {max}")]
pub struct HermiteOrderError {
    pub q: usize,
    pub max: usize,
}

/// `H_q(x)` by the recurrence `H_{k+1} = (x H_k - H_{k-1}) / (k + 1)`.
#[inline]
pub fn hermite(q: usize, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..q {
                let next = (x * cur - prev) / (k + 1) as f64;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Fills `out[k] = H_k(x)` for `k = 0..out.len()`.
pub fn hermite_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = (x * out[k] - out[k - 1]) / (k + 1) as f64;
    }
}

/// Monomial coefficients `c_j` with `H_q(x) = sum_j c_j x^j`, from the
/// closed form `sum_k (-1)^k x^{q-2k} / (k! (q-2k)! 2^k)`.
pub fn monomial_coefficients(q: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; q + 1];
    for k in 0..=q / 2 {
        let denom = factorial_f64(k) * factorial_f64(q - 2 * k) * 2f64.powi(k as i32);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[q - 2 * k] = sign / denom;
    }
    coeffs
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Bounds-checked evaluator for `H_0 ..= H_max`.
#[derive(Debug, Clone, Copy)]
pub struct HermiteEvaluator {
    max_order: usize,
}

impl HermiteEvaluator {
    pub fn new(max_order: usize) -> Self {
        Self { max_order }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn eval(&self, q: usize, x: f64) -> Result<f64, HermiteOrderError> {
        if q > self.max_order {
            return Err(HermiteOrderError {
                q,
                max: self.max_order,
            });
        }
        Ok(hermite(q, x))
    }

    /// All of `H_0(x) ..= H_max(x)`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.max_order + 1];
        hermite_table(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn base_cases() {
        for x in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            assert_eq!(hermite(0, x), 1.0);
            assert_eq!(hermite(1, x), x);
        }
    }

    #[test]
    fn second_order_matches_rodrigues() {
        for x in [-2.0, 0.0, 1.0, 3.0] {
            assert_relative_eq!(hermite(2, x), (x * x - 1.0) / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn third_order_at_two() {
        assert_relative_eq!(hermite(3, 2.0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn recurrence_matches_closed_form() {
        for q in 0..=10 {
            let c = monomial_coefficients(q);
            for i in 0..=40 {
                let x = -5.0 + 0.25 * i as f64;
                let direct: f64 = c.iter().rev().fold(0.0, |acc, &cj| acc * x + cj);
                let rec = hermite(q, x);
                let scale = direct.abs().max(1.0);
                assert!(
                    (rec - direct).abs() <= 1e-12 * scale,
                    "q={q} x={x}: {rec} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn table_agrees_with_scalar() {
        let ev = HermiteEvaluator::new(8);
        let t = ev.eval_all(1.7);
        for (q, v) in t.iter().enumerate() {
            assert_eq!(*v, hermite(q, 1.7));
        }
    }

    #[test]
    fn evaluator_rejects_large_order() {
        let ev = HermiteEvaluator::new(3);
        assert!(ev.eval(3, 0.2).is_ok());
        assert_eq!(ev.eval(4, 0.2), Err(HermiteOrderError { q: 4, max: 3 }));
    }
}
