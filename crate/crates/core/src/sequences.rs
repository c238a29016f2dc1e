//! Deterministic families of chaos vectors indexed by `n`.
//!
//! Every element is `I_q` of the standardized kernel `sym(e_a^{⊗(q-1)} ⊗ u)`,
//! where `e_a` is a coordinate owned by the element and
//! `u = sqrt(1 - w^2) b + w e_s` mixes a unit vector `b` spread evenly over
//! a block of coordinates owned by the element with a coordinate `e_s`
//! shared by the whole vector. Two elements interact only through `e_s`,
//! with strength `w_1 w_2`.
//!
//! | family               | hub weight  | other weights | block | N            |
//! |----------------------|-------------|---------------|-------|--------------|
//! | `disjoint`           | 0           | 0             | n     | M (n + 1)    |
//! | `vanishing_overlap`  | θ/√2        | θ/√n          | n     | M (n + 1) + 1|
//! | `persistent_overlap` | θ/√2        | θ             | 1     | 2M + 1       |
//! | `mixed_orders`       | θ/√2        | θ/√n          | n     | M (n + 1) + 1|
//!
//! `M` is the total number of elements. The hub is the first group of
//! highest order, which becomes group 1 of the generated vector.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chaos::ChaosElement;
use crate::independence::{ChaosVector, IndependenceError};
use crate::tensor::{HilbertSpace, RawTensor, SymmetricTensor, MAX_ORDER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequenceError {
    #[error("unknown family {0:?} (expected disjoint, vanishing_overlap, persistent_overlap or mixed_orders)")]
    UnknownFamily(String),
    #[error("theta must lie in [0, 1], got {0}")]
    Theta(f64),
    #[error("persistent_overlap needs theta > 0")]
    ZeroTheta,
    #[error("n must be at least 1")]
    ZeroIndex,
    #[error("{orders} orders but {sizes} group sizes")]
    ShapeMismatch { orders: usize, sizes: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has order {order}; orders must lie in 1..={max}")]
    Order {
        group: usize,
        order: usize,
        max: usize,
    },
    #[error("group {group} has size 0")]
    EmptyGroup { group: usize },
    #[error("mixed_orders needs exactly two groups with q1 > q2, got orders {0:?}")]
    MixedOrders(Vec<usize>),
    #[error("dimension {0} does not fit 32-bit indices")]
    TooLarge(usize),
    #[error(transparent)]
    Vector(#[from] IndependenceError),
}

pub type Result<T> = std::result::Result<T, SequenceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Disjoint,
    VanishingOverlap,
    PersistentOverlap,
    MixedOrders,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Disjoint,
        Family::VanishingOverlap,
        Family::PersistentOverlap,
        Family::MixedOrders,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Disjoint => "disjoint",
            Family::VanishingOverlap => "vanishing_overlap",
            Family::PersistentOverlap => "persistent_overlap",
            Family::MixedOrders => "mixed_orders",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SequenceError::UnknownFamily(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub orders: Vec<usize>,
    pub sizes: Vec<usize>,
    pub theta: f64,
    pub n: usize,
}

impl FamilySpec {
    /// One element per group.
    pub fn new(family: Family, orders: Vec<usize>, theta: f64, n: usize) -> Self {
        let sizes = vec![1; orders.len()];
        Self {
            family,
            orders,
            sizes,
            theta,
            n,
        }
    }

    pub fn with_sizes(mut self, sizes: Vec<usize>) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.orders.len();
        if d != self.sizes.len() {
            return Err(SequenceError::ShapeMismatch {
                orders: d,
                sizes: self.sizes.len(),
            });
        }
        if d < 2 {
            return Err(SequenceError::TooFewGroups(d));
        }
        for (group, &order) in self.orders.iter().enumerate() {
            if order == 0 || order > MAX_ORDER {
                return Err(SequenceError::Order {
                    group,
                    order,
                    max: MAX_ORDER,
                });
            }
        }
        if let Some(group) = self.sizes.iter().position(|&m| m == 0) {
            return Err(SequenceError::EmptyGroup { group });
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SequenceError::Theta(self.theta));
        }
        if self.n == 0 {
            return Err(SequenceError::ZeroIndex);
        }
        match self.family {
            Family::PersistentOverlap if self.theta == 0.0 => Err(SequenceError::ZeroTheta),
            Family::MixedOrders if d != 2 || self.orders[0] <= self.orders[1] => {
                Err(SequenceError::MixedOrders(self.orders.clone()))
            }
            _ => Ok(()),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn block_len(&self) -> usize {
        match self.family {
            Family::PersistentOverlap => 1,
            _ => self.n,
        }
    }

    fn has_shared(&self) -> bool {
        self.family != Family::Disjoint
    }

    /// Ambient dimension `N` of the generated vector.
    pub fn dimension(&self) -> usize {
        self.num_elements() * (self.block_len() + 1) + usize::from(self.has_shared())
    }

    fn hub(&self) -> usize {
        let top = self.orders.iter().copied().max().unwrap_or(0);
        self.orders.iter().position(|&q| q == top).unwrap_or(0)
    }

    fn weight(&self, group: usize) -> f64 {
        match self.family {
            Family::Disjoint => 0.0,
            _ if group == self.hub() => self.theta / 2f64.sqrt(),
            Family::PersistentOverlap => self.theta,
            Family::VanishingOverlap | Family::MixedOrders => self.theta / (self.n as f64).sqrt(),
        }
    }
}

/// Builds the vector described by `spec`.
pub fn generate(spec: &FamilySpec) -> Result<ChaosVector> {
    spec.validate()?;
    let dim = spec.dimension();
    if u32::try_from(dim).is_err() {
        return Err(SequenceError::TooLarge(dim));
    }
    let space = HilbertSpace::new(dim).expect("dimension is positive");
    let block = spec.block_len();
    let shared = (dim - 1) as u32;
    let spread = 1.0 / (block as f64).sqrt();

    let mut next = 0u32;
    let mut groups = Vec::with_capacity(spec.orders.len());
    for (j, (&q, &m)) in spec.orders.iter().zip(&spec.sizes).enumerate() {
        let w = spec.weight(j);
        let mut elements = Vec::with_capacity(m);
        for _ in 0..m {
            let anchor = next;
            let start = anchor + 1;
            next += block as u32 + 1;
            let c = (1.0 - w * w).sqrt() * spread;
            let mut u: Vec<(u32, f64)> = (0..block as u32).map(|i| (start + i, c)).collect();
            if w != 0.0 {
                u.push((shared, w));
            }
            u.retain(|&(_, v)| v != 0.0);
            let head = [(anchor, 1.0)];
            let mut factors: Vec<&[(u32, f64)]> = vec![&head; q - 1];
            factors.push(&u);
            let kernel = RawTensor::outer(space, &factors)
                .expect("indices are in range")
                .symmetrize();
            let el = ChaosElement::new(kernel)
                .and_then(|e| e.normalize())
                .map_err(IndependenceError::from)?;
            elements.push(el);
        }
        groups.push(elements);
    }
    Ok(ChaosVector::new(groups)?)
}

/// A standardized element of order `q` with between 1 and `max_terms`
/// random entries, for tests and benchmarks.
pub fn random_element<R: Rng + ?Sized>(
    rng: &mut R,
    space: HilbertSpace,
    q: usize,
    max_terms: usize,
) -> ChaosElement {
    loop {
        let terms = rng.random_range(1..=max_terms.max(1));
        let entries: Vec<(Vec<u32>, f64)> = (0..terms)
            .map(|_| {
                let mut idx: Vec<u32> = (0..q)
                    .map(|_| rng.random_range(0..space.dim() as u32))
                    .collect();
                idx.sort_unstable();
                (idx, rng.random_range(-1.0..1.0))
            })
            .collect();
        let mut merged: std::collections::BTreeMap<Vec<u32>, f64> = Default::default();
        for (k, v) in entries {
            *merged.entry(k).or_insert(0.0) += v;
        }
        let Ok(kernel) = SymmetricTensor::from_entries(space, q, merged) else {
            continue;
        };
        if kernel.norm() < 1e-3 {
            continue;
        }
        if let Ok(e) = ChaosElement::new(kernel).and_then(|e| e.normalize()) {
            return e;
        }
    }
}
