//! Sparse symmetric tensors over a finite orthonormal basis `e_0 .. e_{N-1}`.
//!
//! A [`SymmetricTensor`] of order `q` stores one coefficient per sorted
//! multi-index; the value at any permutation of a stored index equals the
//! stored coefficient. Contractions are returned as [`Contraction`], which
//! is symmetric within its left block of free slots and within its right
//! block, but not across them.
//!
//! All summations walk `BTreeMap`s in lexicographic order so results are
//! bit-reproducible.

use std::collections::BTreeMap;
use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

/// Multi-index type. Indices are 0-based basis positions.
pub type MultiIndex = SmallVec<[u32; 8]>;

/// Largest tensor order for which multiplicities are tracked exactly.
pub const MAX_ORDER: usize = 20;

/// Coefficients with magnitude below this are dropped after an operation.
pub const DUST: f64 = 1e-15;

const FACTORIALS: [u64; MAX_ORDER + 1] = {
    let mut table = [1u64; MAX_ORDER + 1];
    let mut i = 1;
    while i <= MAX_ORDER {
        table[i] = table[i - 1] * i as u64;
        i += 1;
    }
    table
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("Hilbert space dimension must be at least 1")]
    ZeroDimension,
    #[error("tensor order {order} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooLarge { order: usize },
    #[error("index {index:?} has length {found}, expected order {expected}")]
    WrongArity {
        index: Vec<u32>,
        expected: usize,
        found: usize,
    },
    #[error("index {index:?} out of range for dimension {dim}")]
    IndexOutOfRange { index: Vec<u32>, dim: usize },
    #[error("index {index:?} is not sorted ascending")]
    Unsorted { index: Vec<u32> },
    #[error("duplicate entry for index {index:?}")]
    DuplicateIndex { index: Vec<u32> },
    #[error("order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    #[error("space mismatch: dimension {left} vs {right}")]
    SpaceMismatch { left: usize, right: usize },
    #[error("contraction index r = {r} outside 0..={max}")]
    ContractionRange { r: usize, max: usize },
    #[error("coefficient for index {index:?} is not finite")]
    NonFinite { index: Vec<u32> },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Real Hilbert space with an implicit orthonormal basis of `dim` vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    dim: usize,
}

impl HilbertSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(TensorError::ZeroDimension);
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_same(&self, other: &HilbertSpace) -> Result<()> {
        if self.dim != other.dim {
            return Err(TensorError::SpaceMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    fn check_index(&self, index: &[u32], order: usize) -> Result<()> {
        if index.len() != order {
            return Err(TensorError::WrongArity {
                index: index.to_vec(),
                expected: order,
                found: index.len(),
            });
        }
        if index.iter().any(|&i| i as usize >= self.dim) {
            return Err(TensorError::IndexOutOfRange {
                index: index.to_vec(),
                dim: self.dim,
            });
        }
        Ok(())
    }
}

pub fn factorial(n: usize) -> u64 {
    FACTORIALS[n]
}

/// Number of distinct orderings of a sorted multi-index: `q! / prod(a_i!)`
/// where `a_i` are the occupation counts.
pub fn multiplicity(sorted: &[u32]) -> u64 {
    let mut denom = 1u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        denom *= FACTORIALS[j - i];
        i = j;
    }
    FACTORIALS[sorted.len()] / denom
}

/// Run-length encoding of a sorted index: `(basis index, occupation count)`.
pub fn occupations(sorted: &[u32]) -> SmallVec<[(u32, usize); 8]> {
    let mut runs: SmallVec<[(u32, usize); 8]> = SmallVec::new();
    for &i in sorted {
        match runs.last_mut() {
            Some((last, count)) if *last == i => *count += 1,
            _ => runs.push((i, 1)),
        }
    }
    runs
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(TensorError::OrderTooLarge { order });
    }
    Ok(())
}

fn is_sorted(index: &[u32]) -> bool {
    index.windows(2).all(|w| w[0] <= w[1])
}

fn sorted_copy(index: &[u32]) -> MultiIndex {
    let mut out: MultiIndex = index.iter().copied().collect();
    out.sort_unstable();
    out
}

fn merge_sorted(a: &[u32], b: &[u32]) -> MultiIndex {
    let mut out = MultiIndex::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn drop_dust<K: Ord>(map: &mut BTreeMap<K, f64>) {
    map.retain(|_, v| v.abs() >= DUST);
}

/// Symmetric tensor in canonical sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    space: HilbertSpace,
    order: usize,
    entries: BTreeMap<MultiIndex, f64>,
}

impl SymmetricTensor {
    pub fn zero(space: HilbertSpace, order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            space,
            order,
            entries: BTreeMap::new(),
        })
    }

    /// Order-0 tensor holding a single scalar.
    pub fn scalar(space: HilbertSpace, value: f64) -> Self {
        let mut entries = BTreeMap::new();
        if value != 0.0 {
            entries.insert(MultiIndex::new(), value);
        }
        Self {
            space,
            order: 0,
            entries,
        }
    }

    /// `e_i ⊗ ... ⊗ e_i` (`order` factors).
    pub fn basis_power(space: HilbertSpace, i: u32, order: usize) -> Result<Self> {
        Self::from_entries(space, order, [(vec![i; order], 1.0)])
    }

    /// Builds a tensor from entries keyed by sorted multi-indices.
    ///
    /// Unsorted, out-of-range and duplicate indices are rejected. Entries
    /// equal to zero are skipped.
    pub fn from_entries<I, K>(space: HilbertSpace, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: AsRef<[u32]>,
    {
        check_order(order)?;
        let mut map = BTreeMap::new();
        for (key, value) in entries {
            let key = key.as_ref();
            space.check_index(key, order)?;
            if !is_sorted(key) {
                return Err(TensorError::Unsorted {
                    index: key.to_vec(),
                });
            }
            if !value.is_finite() {
                return Err(TensorError::NonFinite {
                    index: key.to_vec(),
                });
            }
            let key: MultiIndex = key.iter().copied().collect();
            if map.contains_key(&key) {
                return Err(TensorError::DuplicateIndex {
                    index: key.to_vec(),
                });
            }
            if value != 0.0 {
                map.insert(key, value);
            }
        }
        Ok(Self {
            space,
            order,
            entries: map,
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored (sorted) entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored entries in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Value at an arbitrary (not necessarily sorted) index tuple.
    pub fn get(&self, index: &[u32]) -> f64 {
        if index.len() != self.order {
            return 0.0;
        }
        self.entries
            .get(&sorted_copy(index))
            .copied()
            .unwrap_or(0.0)
    }

    /// Basis indices touched by at least one entry.
    pub fn support(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.entries.keys().flatten().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut entries: BTreeMap<MultiIndex, f64> = self
            .entries
            .iter()
            .map(|(k, &v)| (k.clone(), v * factor))
            .collect();
        drop_dust(&mut entries);
        Self {
            space: self.space,
            order: self.order,
            entries,
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SymmetricTensor, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut entries: BTreeMap<MultiIndex, f64> = self
            .entries
            .iter()
            .map(|(k, &v)| (k.clone(), a * v))
            .collect();
        for (k, &v) in &other.entries {
            *entries.entry(k.clone()).or_insert(0.0) += b * v;
        }
        drop_dust(&mut entries);
        Ok(Self {
            space: self.space,
            order: self.order,
            entries,
        })
    }

    fn check_compatible(&self, other: &SymmetricTensor) -> Result<()> {
        self.space.check_same(&other.space)?;
        if self.order != other.order {
            return Err(TensorError::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }

    /// Inner product in `H^{⊗q}`: the sum over all `q`-tuples, computed as
    /// the sum over sorted indices weighted by their multiplicity.
    pub fn inner(&self, other: &SymmetricTensor) -> Result<f64> {
        self.check_compatible(other)?;
        let mut acc = 0.0;
        for (k, &a) in &self.entries {
            if let Some(&b) = other.entries.get(k) {
                acc += multiplicity(k) as f64 * (a * b);
            }
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|(k, &v)| multiplicity(k) as f64 * (v * v))
            .fold(0.0, |a, b| a + b)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Groups entries by the sub-multiset `K` (size `r`) removed from each
    /// stored index. The value is the list of `(remaining index, coefficient)`.
    fn split_table(&self, r: usize) -> BTreeMap<MultiIndex, Vec<(MultiIndex, f64)>> {
        let mut table: BTreeMap<MultiIndex, Vec<(MultiIndex, f64)>> = BTreeMap::new();
        for (key, &value) in &self.entries {
            let runs = occupations(key);
            let mut taken = vec![0usize; runs.len()];
            for_each_submultiset(&runs, r, 0, &mut taken, &mut |taken| {
                let mut contracted = MultiIndex::new();
                let mut free = MultiIndex::new();
                for (&(idx, count), &t) in runs.iter().zip(taken) {
                    contracted.extend(std::iter::repeat_n(idx, t));
                    free.extend(std::iter::repeat_n(idx, count - t));
                }
                table.entry(contracted).or_default().push((free, value));
            });
        }
        table
    }

    /// The `r`-th contraction `f ⊗_r g`: slots are paired between the last
    /// `r` slots of `self` and the last `r` slots of `other`. `r = 0` is the
    /// tensor product and `r = p = q` the inner product.
    pub fn contract(&self, other: &SymmetricTensor, r: usize) -> Result<Contraction> {
        self.space.check_same(&other.space)?;
        let max = self.order.min(other.order);
        if r > max {
            return Err(TensorError::ContractionRange { r, max });
        }
        let left_order = self.order - r;
        let right_order = other.order - r;
        check_order(left_order + right_order)?;

        let left = self.split_table(r);
        let right = other.split_table(r);
        let mut entries: BTreeMap<(MultiIndex, MultiIndex), f64> = BTreeMap::new();
        for (k, lhs) in &left {
            let Some(rhs) = right.get(k) else { continue };
            let weight = multiplicity(k) as f64;
            for (i, a) in lhs {
                for (j, b) in rhs {
                    *entries.entry((i.clone(), j.clone())).or_insert(0.0) += weight * (a * b);
                }
            }
        }
        drop_dust(&mut entries);
        Ok(Contraction {
            space: self.space,
            left_order,
            right_order,
            entries,
        })
    }

    /// Symmetrized contraction `f ⊗̃_r g`.
    pub fn contract_sym(&self, other: &SymmetricTensor, r: usize) -> Result<SymmetricTensor> {
        Ok(self.contract(other, r)?.symmetrize())
    }

    /// Expands to every ordered index tuple. Exponential in the order; meant
    /// for small tensors and tests.
    pub fn to_raw(&self) -> RawTensor {
        let mut entries = BTreeMap::new();
        for (k, &v) in &self.entries {
            for_each_distinct_permutation(k, &mut |p| {
                entries.insert(p.iter().copied().collect(), v);
            });
        }
        RawTensor {
            space: self.space,
            order: self.order,
            entries,
        }
    }
}

fn for_each_submultiset(
    runs: &[(u32, usize)],
    remaining: usize,
    pos: usize,
    taken: &mut [usize],
    visit: &mut dyn FnMut(&[usize]),
) {
    if pos == runs.len() {
        if remaining == 0 {
            visit(taken);
        }
        return;
    }
    let cap = runs[pos].1.min(remaining);
    for t in 0..=cap {
        taken[pos] = t;
        for_each_submultiset(runs, remaining - t, pos + 1, taken, visit);
    }
    taken[pos] = 0;
}

/// Visits each distinct ordering of a sorted multi-index, in lexicographic order.
fn for_each_distinct_permutation(sorted: &[u32], visit: &mut dyn FnMut(&[u32])) {
    let mut current: Vec<u32> = sorted.to_vec();
    loop {
        visit(&current);
        // next lexicographic permutation
        let Some(i) = (0..current.len().saturating_sub(1))
            .rev()
            .find(|&i| current[i] < current[i + 1])
        else {
            return;
        };
        let j = (i + 1..current.len())
            .rev()
            .find(|&j| current[j] > current[i])
            .expect("successor exists");
        current.swap(i, j);
        current[i + 1..].reverse();
    }
}

impl fmt::Display for SymmetricTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymmetricTensor(N={}, q={}, {{", self.space.dim, self.order)?;
        for (n, (k, v)) in self.entries.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}: {}", k.as_slice(), v)?;
        }
        write!(f, "}})")
    }
}

/// General order-`q` tensor keyed by ordered index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    space: HilbertSpace,
    order: usize,
    entries: BTreeMap<MultiIndex, f64>,
}

impl RawTensor {
    pub fn from_entries<I, K>(space: HilbertSpace, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: AsRef<[u32]>,
    {
        check_order(order)?;
        let mut map = BTreeMap::new();
        for (key, value) in entries {
            let key = key.as_ref();
            space.check_index(key, order)?;
            if !value.is_finite() {
                return Err(TensorError::NonFinite {
                    index: key.to_vec(),
                });
            }
            let key: MultiIndex = key.iter().copied().collect();
            if map.contains_key(&key) {
                return Err(TensorError::DuplicateIndex {
                    index: key.to_vec(),
                });
            }
            if value != 0.0 {
                map.insert(key, value);
            }
        }
        Ok(Self {
            space,
            order,
            entries: map,
        })
    }

    /// Tensor product of sparse vectors, each given as `(index, coefficient)` pairs.
    pub fn outer(space: HilbertSpace, factors: &[&[(u32, f64)]]) -> Result<Self> {
        check_order(factors.len())?;
        let mut entries: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        entries.insert(MultiIndex::new(), 1.0);
        for factor in factors {
            let mut next = BTreeMap::new();
            for (k, &v) in &entries {
                for &(i, c) in factor.iter() {
                    if i as usize >= space.dim {
                        return Err(TensorError::IndexOutOfRange {
                            index: vec![i],
                            dim: space.dim,
                        });
                    }
                    let mut key = k.clone();
                    key.push(i);
                    *next.entry(key).or_insert(0.0) += v * c;
                }
            }
            entries = next;
        }
        entries.retain(|_, v| *v != 0.0);
        Ok(Self {
            space,
            order: factors.len(),
            entries,
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn get(&self, index: &[u32]) -> f64 {
        self.entries.get(index).copied().unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).fold(0.0, |a, b| a + b)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Average over all `q!` slot permutations, stored canonically.
    pub fn symmetrize(&self) -> SymmetricTensor {
        let mut entries: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (k, &v) in &self.entries {
            let key = sorted_copy(k);
            let m = multiplicity(&key) as f64;
            *entries.entry(key).or_insert(0.0) += v / m;
        }
        drop_dust(&mut entries);
        SymmetricTensor {
            space: self.space,
            order: self.order,
            entries,
        }
    }
}

/// Result of `f ⊗_r g` for symmetric `f` (order `p`) and `g` (order `q`).
///
/// Stored as `(sorted left block, sorted right block) -> value`; the value at
/// an ordered tuple `(i_1..i_{p-r}, j_1..j_{q-r})` is the stored value of
/// `(sort(i), sort(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    space: HilbertSpace,
    left_order: usize,
    right_order: usize,
    entries: BTreeMap<(MultiIndex, MultiIndex), f64>,
}

impl Contraction {
    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn order(&self) -> usize {
        self.left_order + self.right_order
    }

    pub fn left_order(&self) -> usize {
        self.left_order
    }

    pub fn right_order(&self) -> usize {
        self.right_order
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Block-sorted entries: `(left, right, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], &[u32], f64)> + '_ {
        self.entries
            .iter()
            .map(|((i, j), &v)| (i.as_slice(), j.as_slice(), v))
    }

    /// For a full contraction (`r = p = q`), the scalar `<f, g>`.
    pub fn scalar_value(&self) -> Option<f64> {
        (self.order() == 0).then(|| self.entries.values().next().copied().unwrap_or(0.0))
    }

    pub fn get(&self, index: &[u32]) -> f64 {
        if index.len() != self.order() {
            return 0.0;
        }
        let (i, j) = index.split_at(self.left_order);
        self.entries
            .get(&(sorted_copy(i), sorted_copy(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Hilbert-Schmidt norm squared over all ordered tuples.
    pub fn norm_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|((i, j), &v)| (multiplicity(i) * multiplicity(j)) as f64 * (v * v))
            .fold(0.0, |a, b| a + b)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn symmetrize(&self) -> SymmetricTensor {
        let mut entries: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for ((i, j), &v) in &self.entries {
            let key = merge_sorted(i, j);
            let weight =
                (multiplicity(i) * multiplicity(j)) as f64 / multiplicity(&key) as f64;
            *entries.entry(key).or_insert(0.0) += weight * v;
        }
        drop_dust(&mut entries);
        SymmetricTensor {
            space: self.space,
            order: self.order(),
            entries,
        }
    }

    /// Expands to every ordered tuple.
    pub fn to_raw(&self) -> RawTensor {
        let mut entries = BTreeMap::new();
        for ((i, j), &v) in &self.entries {
            for_each_distinct_permutation(i, &mut |pi| {
                for_each_distinct_permutation(j, &mut |pj| {
                    let key: MultiIndex = pi.iter().chain(pj).copied().collect();
                    entries.insert(key, v);
                });
            });
        }
        RawTensor {
            space: self.space,
            order: self.order(),
            entries,
        }
    }
}
