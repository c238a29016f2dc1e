//! Multiple Wiener-Itô integrals `I_q(f)` over a finite Gaussian space.
//!
//! The coordinate `X(e_i)` of the isonormal process is the `i`-th entry of a
//! standard normal vector, so `I_q(f)` is the polynomial
//! `sum_m q! f[m] prod_i H_{a_i(m)}(x_i)` with `a_i(m)` the occupation count
//! of `i` in the sorted index `m`.

use std::collections::BTreeMap;

use smallvec::SmallVec;
use thiserror::Error;

use crate::hermite::{hermite, monomial_coefficients};
use crate::tensor::{factorial, occupations, HilbertSpace, SymmetricTensor, TensorError};

/// `|q! ||f||^2 - 1|` below this counts as unit variance.
pub const STANDARDIZED_TOL: f64 = 1e-10;

/// Largest total order accepted by [`isserlis_moment`].
pub const ISSERLIS_MAX_TOTAL_ORDER: usize = 12;
/// Largest number of distinct coordinates touched by the kernels passed to
/// [`isserlis_moment`].
pub const ISSERLIS_MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChaosError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("chaos elements need order at least 1")]
    ZeroOrder,
    #[error("kernel is zero; the element has no variance")]
    Degenerate,
    #[error("sample has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("moment oracle limited to total order {max_order} and {max_dim} active coordinates (got {total_order}, {dim})")]
    ResourceLimit {
        total_order: usize,
        dim: usize,
        max_order: usize,
        max_dim: usize,
    },
}

pub type Result<T> = std::result::Result<T, ChaosError>;

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    factors: SmallVec<[(u32, u8); 4]>,
}

fn compile(kernel: &SymmetricTensor) -> Vec<Term> {
    let scale = factorial(kernel.order()) as f64;
    kernel
        .iter()
        .map(|(idx, v)| Term {
            coef: scale * v,
            factors: occupations(idx)
                .into_iter()
                .map(|(i, a)| (i, a as u8))
                .collect(),
        })
        .collect()
}

#[inline]
fn eval_terms(terms: &[Term], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for t in terms {
        let mut prod = t.coef;
        for &(i, a) in &t.factors {
            prod *= hermite(a as usize, x[i as usize]);
        }
        acc += prod;
    }
    acc
}

/// `I_q(f)` for a symmetric kernel `f` of order `q >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosElement {
    kernel: SymmetricTensor,
    standardized: bool,
    terms: Vec<Term>,
}

impl ChaosElement {
    pub fn new(kernel: SymmetricTensor) -> Result<Self> {
        if kernel.order() == 0 {
            return Err(ChaosError::ZeroOrder);
        }
        let variance = factorial(kernel.order()) as f64 * kernel.norm_sq();
        let standardized = (variance - 1.0).abs() <= STANDARDIZED_TOL;
        let terms = compile(&kernel);
        Ok(Self {
            kernel,
            standardized,
            terms,
        })
    }

    /// `I_1(e_i)`, the `i`-th coordinate.
    pub fn coordinate(space: HilbertSpace, i: u32) -> Result<Self> {
        Self::new(SymmetricTensor::basis_power(space, i, 1)?)
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    pub fn kernel(&self) -> &SymmetricTensor {
        &self.kernel
    }

    pub fn space(&self) -> HilbertSpace {
        self.kernel.space()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// `E[I_q(f)^2] = q! ||f||^2`.
    pub fn variance(&self) -> f64 {
        factorial(self.order()) as f64 * self.kernel.norm_sq()
    }

    /// Rescales to unit variance. Already standardized elements are returned as is.
    pub fn normalize(&self) -> Result<Self> {
        if self.standardized {
            return Ok(self.clone());
        }
        let variance = self.variance();
        if self.kernel.is_empty() || variance <= 0.0 {
            return Err(ChaosError::Degenerate);
        }
        let mut out = Self::new(self.kernel.scale(1.0 / variance.sqrt()))?;
        out.standardized = true;
        Ok(out)
    }

    /// Value of the integral at the Gaussian coordinates `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let dim = self.space().dim();
        if x.len() != dim {
            return Err(ChaosError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        Ok(eval_terms(&self.terms, x))
    }

    /// As [`evaluate`](Self::evaluate) without the length check; `x` must
    /// cover every coordinate in the kernel's support.
    #[inline]
    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        eval_terms(&self.terms, x)
    }
}

/// Finite chaos decomposition `sum_k I_k(h_k)`; order 0 holds the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    space: HilbertSpace,
    components: BTreeMap<usize, SymmetricTensor>,
}

impl ChaosExpansion {
    pub fn new(space: HilbertSpace) -> Self {
        Self {
            space,
            components: BTreeMap::new(),
        }
    }

    /// Adds `I_k(h)` to the expansion, merging with any existing order-`k` part.
    pub fn add(&mut self, h: SymmetricTensor) -> Result<()> {
        if h.space() != self.space {
            return Err(TensorError::SpaceMismatch {
                left: self.space.dim(),
                right: h.space().dim(),
            }
            .into());
        }
        let k = h.order();
        let merged = match self.components.remove(&k) {
            Some(existing) => existing.combine(1.0, &h, 1.0)?,
            None => h,
        };
        if !merged.is_empty() {
            self.components.insert(k, merged);
        }
        Ok(())
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn component(&self, order: usize) -> Option<&SymmetricTensor> {
        self.components.get(&order)
    }

    /// Orders with a nonzero component, ascending.
    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.components.keys().copied()
    }

    pub fn mean(&self) -> f64 {
        self.components
            .get(&0)
            .map(|h| h.get(&[]))
            .unwrap_or(0.0)
    }

    pub fn second_moment(&self) -> f64 {
        self.components
            .iter()
            .map(|(&k, h)| factorial(k) as f64 * h.norm_sq())
            .fold(0.0, |a, b| a + b)
    }

    pub fn variance(&self) -> f64 {
        self.components
            .iter()
            .filter(|(&k, _)| k > 0)
            .map(|(&k, h)| factorial(k) as f64 * h.norm_sq())
            .fold(0.0, |a, b| a + b)
    }

    /// `sum_{k >= 1} k! <h_k, h'_k>`.
    pub fn covariance(&self, other: &ChaosExpansion) -> Result<f64> {
        let (small, large) = if other.components.len() < self.components.len() {
            (other, self)
        } else {
            (self, other)
        };
        let mut acc = 0.0;
        for (&k, h) in small.components.range(1..) {
            if let Some(g) = large.components.get(&k) {
                acc += factorial(k) as f64 * h.inner(g)?;
            }
        }
        Ok(acc)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.space.dim() {
            return Err(ChaosError::DimensionMismatch {
                expected: self.space.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .components
            .values()
            .map(|h| eval_terms(&compile(h), x))
            .fold(0.0, |a, b| a + b))
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Product formula:
/// `I_p(f) I_q(g) = sum_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g)`.
pub fn multiply(f: &ChaosElement, g: &ChaosElement) -> Result<ChaosExpansion> {
    let (p, q) = (f.order(), g.order());
    let mut out = ChaosExpansion::new(f.space());
    for r in 0..=p.min(q) {
        let weight = (factorial(r) * binomial(p, r) * binomial(q, r)) as f64;
        let h = f.kernel.contract_sym(&g.kernel, r)?;
        out.add(h.scale(weight))?;
    }
    Ok(out)
}

/// Exact `Cov(F^2, G^2)` via the chaos expansions of `F^2` and `G^2`.
pub fn cov_squares(f: &ChaosElement, g: &ChaosElement) -> Result<f64> {
    let f2 = multiply(f, f)?;
    let g2 = multiply(g, g)?;
    f2.covariance(&g2)
}

/// `||f ⊗_r g||` (unsymmetrized) for `r = 1 ..= min(p, q)`.
pub fn contraction_norms(f: &ChaosElement, g: &ChaosElement) -> Result<Vec<f64>> {
    (1..=f.order().min(g.order()))
        .map(|r| Ok(f.kernel.contract(&g.kernel, r)?.norm()))
        .collect()
}

type Exponents = SmallVec<[u8; ISSERLIS_MAX_DIM]>;

#[derive(Debug, Clone)]
struct Polynomial {
    terms: BTreeMap<Exponents, f64>,
}

impl Polynomial {
    fn one(dim: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(SmallVec::from_elem(0, dim), 1.0);
        Self { terms }
    }

    fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut terms: BTreeMap<Exponents, f64> = BTreeMap::new();
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        Polynomial { terms }
    }

    fn add_scaled(&mut self, other: &Polynomial, c: f64) {
        for (e, &v) in &other.terms {
            *self.terms.entry(e.clone()).or_insert(0.0) += c * v;
        }
    }

    /// `E[prod x_i^{e_i}]` for independent standard normals:
    /// zero if any exponent is odd, else `prod (e_i - 1)!!`.
    fn gaussian_expectation(&self) -> f64 {
        let mut acc = 0.0;
        for (e, &c) in &self.terms {
            if e.iter().any(|&k| k % 2 == 1) {
                continue;
            }
            let pairings: f64 = e.iter().map(|&k| double_factorial_odd(k)).product();
            acc += c * pairings;
        }
        acc
    }
}

/// `(k - 1)!!` for even `k`: the number of perfect matchings of `k` points.
fn double_factorial_odd(k: u8) -> f64 {
    let mut out = 1.0;
    let mut j = k as i32 - 1;
    while j > 1 {
        out *= j as f64;
        j -= 2;
    }
    out
}

fn univariate_hermite(dim: usize, coord: usize, q: usize) -> Polynomial {
    let mut terms = BTreeMap::new();
    for (power, c) in monomial_coefficients(q).into_iter().enumerate() {
        if c != 0.0 {
            let mut e: Exponents = SmallVec::from_elem(0, dim);
            e[coord] = power as u8;
            terms.insert(e, c);
        }
    }
    Polynomial { terms }
}

fn element_polynomial(e: &ChaosElement, active: &BTreeMap<u32, usize>) -> Polynomial {
    let dim = active.len();
    let scale = factorial(e.order()) as f64;
    let mut poly = Polynomial::zero();
    for (idx, v) in e.kernel.iter() {
        let mut term = Polynomial::one(dim);
        for (i, a) in occupations(idx) {
            term = term.mul(&univariate_hermite(dim, active[&i], a));
        }
        poly.add_scaled(&term, scale * v);
    }
    poly
}

/// `E[prod_k F_k]` by brute force: each `I_q(f)` is expanded into raw
/// monomials of the coordinates and Gaussian moments are applied termwise.
///
/// Independent of the contraction code; used as a cross-check.
pub fn isserlis_moment(elements: &[ChaosElement]) -> Result<f64> {
    let Some(first) = elements.first() else {
        return Ok(1.0);
    };
    let space = first.space();
    for e in elements {
        if e.space() != space {
            return Err(TensorError::SpaceMismatch {
                left: space.dim(),
                right: e.space().dim(),
            }
            .into());
        }
    }
    let mut active = BTreeMap::new();
    for e in elements {
        for (idx, _) in e.kernel.iter() {
            for &i in idx {
                active.insert(i, 0);
            }
        }
    }
    for (k, slot) in active.values_mut().enumerate() {
        *slot = k;
    }
    let total_order: usize = elements.iter().map(|e| e.order()).sum();
    if total_order > ISSERLIS_MAX_TOTAL_ORDER || active.len() > ISSERLIS_MAX_DIM {
        return Err(ChaosError::ResourceLimit {
            total_order,
            dim: active.len(),
            max_order: ISSERLIS_MAX_TOTAL_ORDER,
            max_dim: ISSERLIS_MAX_DIM,
        });
    }
    let mut poly = Polynomial::one(active.len());
    for e in elements {
        poly = poly.mul(&element_polynomial(e, &active));
    }
    Ok(poly.gaussian_expectation())
}
