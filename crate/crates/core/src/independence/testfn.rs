//! Bounded smooth test functions with certified derivative bounds.

use std::fmt;

use serde::Serialize;

/// Upper bounds on `sup |tanh^{(k)}|` for `k = 0..=8`. Odd orders are the
/// exact values at the origin; even orders are rounded up.
const TANH_DERIVATIVE_SUP: [f64; 9] = [
    1.0, 1.0, 0.769_800_4, 2.0, 4.085_886, 16.0, 52.265_96, 272.0, 1223.721,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Cos { omega: f64 },
    Sin { omega: f64 },
    Tanh,
}

/// `x -> amplitude * shape(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub shape: Shape,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn cos(omega: f64) -> Self {
        Self {
            shape: Shape::Cos { omega },
            amplitude: 1.0,
        }
    }

    pub fn sin(omega: f64) -> Self {
        Self {
            shape: Shape::Sin { omega },
            amplitude: 1.0,
        }
    }

    pub fn tanh() -> Self {
        Self {
            shape: Shape::Tanh,
            amplitude: 1.0,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            amplitude: self.amplitude * factor,
            ..self
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let v = match self.shape {
            Shape::Cos { omega } => (omega * x).cos(),
            Shape::Sin { omega } => (omega * x).sin(),
            Shape::Tanh => x.tanh(),
        };
        self.amplitude * v
    }

    /// Certified bound on `sup |psi^{(k)}|`, or `None` past the tabulated order.
    pub fn derivative_bound(&self, k: usize) -> Option<f64> {
        let raw = match self.shape {
            Shape::Cos { omega } | Shape::Sin { omega } => omega.abs().powi(k as i32),
            Shape::Tanh => *TANH_DERIVATIVE_SUP.get(k)?,
        };
        Some(self.amplitude.abs() * raw)
    }

    /// `sum_{k=0}^{q} sup |psi^{(k)}|`.
    pub fn norm(&self, q: usize) -> Option<f64> {
        (0..=q).map(|k| self.derivative_bound(k)).sum()
    }

    /// Norm of `(x_1..x_m) -> prod_l psi(x_l)`: sum over derivative
    /// multi-indices `(k_1..k_m)` of total order at most `q` of
    /// `prod_l sup |psi^{(k_l)}|`.
    pub fn product_norm(&self, m: usize, q: usize) -> Option<f64> {
        let bounds: Vec<f64> = (0..=q)
            .map(|k| self.derivative_bound(k))
            .collect::<Option<_>>()?;
        // coefficients of (sum_k b_k t^k)^m truncated at degree q
        let mut poly = vec![0.0; q + 1];
        poly[0] = 1.0;
        for _ in 0..m {
            let mut next = vec![0.0; q + 1];
            for (i, &a) in poly.iter().enumerate() {
                for (k, &b) in bounds.iter().enumerate().take(q + 1 - i) {
                    next[i + k] += a * b;
                }
            }
            poly = next;
        }
        Some(poly.iter().sum())
    }

    /// Largest first partial derivative bound of the `m`-fold product.
    pub fn product_gradient_bound(&self, m: usize) -> Option<f64> {
        Some(self.derivative_bound(1)? * self.derivative_bound(0)?.powi(m as i32 - 1))
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amplitude != 1.0 {
            write!(f, "{}*", self.amplitude)?;
        }
        match self.shape {
            Shape::Cos { omega } => write!(f, "cos({omega}x)"),
            Shape::Sin { omega } => write!(f, "sin({omega}x)"),
            Shape::Tanh => write!(f, "tanh(x)"),
        }
    }
}

/// `{cos(wx), sin(wx) : w in {1/2, 1, 2}} ∪ {tanh}`.
pub fn default_functions() -> Vec<TestFunction> {
    let mut out = Vec::with_capacity(7);
    for omega in [0.5, 1.0, 2.0] {
        out.push(TestFunction::cos(omega));
        out.push(TestFunction::sin(omega));
    }
    out.push(TestFunction::tanh());
    out
}
