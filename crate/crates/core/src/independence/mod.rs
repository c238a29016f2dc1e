//! Asymptotic-independence diagnostics for vectors of chaos elements.
//!
//! Three views of dependence between groups of a [`ChaosVector`]:
//! exact covariances of squares, exact contraction norms between kernels,
//! and a Monte Carlo estimate of `E[prod psi_j] - prod E[psi_j]` over a
//! finite dictionary of test functions.

mod report;
mod testfn;

use serde::Serialize;
use thiserror::Error;

use crate::chaos::{contraction_norms, cov_squares, ChaosElement, ChaosError};
use crate::montecarlo::{self, Execution, MonteCarloError, SampleBatch};
use crate::tensor::HilbertSpace;

pub use report::IndependenceReport;
pub use testfn::{default_functions, Shape, TestFunction};

/// Minimum sample count for [`empirical_dependence`].
pub const MIN_SAMPLES: usize = 10_000;

/// Default tolerance for the exact conditions.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Width, in standard errors, of statistical verdicts.
pub const STDERR_BAND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndependenceError {
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error("a chaos vector needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("group {group} mixes orders {expected} and {found}")]
    MixedOrders {
        group: usize,
        expected: usize,
        found: usize,
    },
    #[error("element {label} has variance {variance}, expected 1")]
    NotStandardized { label: ElementLabel, variance: f64 },
    #[error("element {label} lives in dimension {found}, expected {expected}")]
    SpaceMismatch {
        label: ElementLabel,
        expected: usize,
        found: usize,
    },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("dictionary has {found} function lists for {expected} groups")]
    DictionaryShape { expected: usize, found: usize },
    #[error("dictionary for group {group} is empty")]
    EmptyDictionary { group: usize },
    #[error("{samples} samples is below the floor of {min}")]
    TooFewSamples { samples: usize, min: usize },
    #[error("no certified derivative bound for {function} at order {order}")]
    UnboundedNorm { function: String, order: usize },
    #[error("cross-group squared covariance is zero for {left} / {right}; bound ratio undefined")]
    Degenerate {
        left: ElementLabel,
        right: ElementLabel,
    },
}

pub type Result<T> = std::result::Result<T, IndependenceError>;

/// Position of an element: 0-based group and element index. Displays 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ElementLabel {
    pub group: usize,
    pub element: usize,
}

impl std::fmt::Display for ElementLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.group + 1, self.element + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosGroup {
    order: usize,
    elements: Vec<ChaosElement>,
}

impl ChaosGroup {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn elements(&self) -> &[ChaosElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `d >= 2` groups of standardized chaos elements over one space, each
/// group of a single order, sorted so orders are weakly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector {
    space: HilbertSpace,
    groups: Vec<ChaosGroup>,
}

impl ChaosVector {
    pub fn new(groups: Vec<Vec<ChaosElement>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(IndependenceError::TooFewGroups(groups.len()));
        }
        let mut space = None;
        let mut built = Vec::with_capacity(groups.len());
        for (g, elements) in groups.into_iter().enumerate() {
            let Some(first) = elements.first() else {
                return Err(IndependenceError::EmptyGroup { group: g });
            };
            let order = first.order();
            let space = *space.get_or_insert(first.space());
            for (e, el) in elements.iter().enumerate() {
                let label = ElementLabel {
                    group: g,
                    element: e,
                };
                if el.order() != order {
                    return Err(IndependenceError::MixedOrders {
                        group: g,
                        expected: order,
                        found: el.order(),
                    });
                }
                if el.space() != space {
                    return Err(IndependenceError::SpaceMismatch {
                        label,
                        expected: space.dim(),
                        found: el.space().dim(),
                    });
                }
                if !el.is_standardized() {
                    return Err(IndependenceError::NotStandardized {
                        label,
                        variance: el.variance(),
                    });
                }
            }
            built.push(ChaosGroup { order, elements });
        }
        built.sort_by(|a, b| b.order.cmp(&a.order));
        Ok(Self {
            space: space.expect("at least two groups"),
            groups: built,
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn groups(&self) -> &[ChaosGroup] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Total number of elements `M`.
    pub fn len(&self) -> usize {
        self.groups.iter().map(ChaosGroup::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn orders(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.order).collect()
    }

    /// Elements in group order with their labels.
    pub fn elements(&self) -> impl Iterator<Item = (ElementLabel, &ChaosElement)> + '_ {
        self.groups.iter().enumerate().flat_map(|(g, grp)| {
            grp.elements.iter().enumerate().map(move |(e, el)| {
                (
                    ElementLabel {
                        group: g,
                        element: e,
                    },
                    el,
                )
            })
        })
    }

    fn labels(&self) -> Vec<ElementLabel> {
        self.elements().map(|(l, _)| l).collect()
    }
}

/// Full `M x M` matrix of `Cov(F_a^2, F_b^2)`. Entries between different
/// groups enter the criterion; same-group entries are informational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquaredCovMatrix {
    pub labels: Vec<ElementLabel>,
    pub values: Vec<Vec<f64>>,
}

impl SquaredCovMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a][b]
    }

    /// `(a, b, value)` for every pair `a < b` in different groups.
    pub fn cross_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.labels.len();
        (0..n).flat_map(move |a| {
            ((a + 1)..n)
                .filter(move |&b| self.labels[a].group != self.labels[b].group)
                .map(move |b| (a, b, self.values[a][b]))
        })
    }

    /// `(a, b, value)` for pairs `a < b` in the same group.
    pub fn within_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.labels.len();
        (0..n).flat_map(move |a| {
            ((a + 1)..n)
                .filter(move |&b| self.labels[a].group == self.labels[b].group)
                .map(move |b| (a, b, self.values[a][b]))
        })
    }

    /// Sum of cross-group entries over pairs `a < b`.
    pub fn cross_sum(&self) -> f64 {
        self.cross_pairs().map(|(_, _, v)| v).fold(0.0, |a, b| a + b)
    }
}

pub fn squared_cov_matrix(v: &ChaosVector) -> Result<SquaredCovMatrix> {
    let elements: Vec<&ChaosElement> = v.elements().map(|(_, e)| e).collect();
    let n = elements.len();
    let mut values = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let c = cov_squares(elements[a], elements[b])?;
            values[a][b] = c;
            values[b][a] = c;
        }
    }
    Ok(SquaredCovMatrix {
        labels: v.labels(),
        values,
    })
}

/// Exact quantities for one cross-group pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub left: ElementLabel,
    pub right: ElementLabel,
    pub cov2: f64,
    /// `||f ⊗_r g||` for `r = 1 ..= min(p, q)`.
    pub contraction_norms: Vec<f64>,
    pub max_contraction_norm: f64,
    /// 1-based `r` attaining the maximum (first one on ties).
    pub r_argmax: usize,
}

/// Cross-group pairs in lexicographic label order.
pub fn pair_records(v: &ChaosVector) -> Result<Vec<PairRecord>> {
    let matrix = squared_cov_matrix(v)?;
    pair_records_with(v, &matrix)
}

fn pair_records_with(v: &ChaosVector, matrix: &SquaredCovMatrix) -> Result<Vec<PairRecord>> {
    let elements: Vec<&ChaosElement> = v.elements().map(|(_, e)| e).collect();
    matrix
        .cross_pairs()
        .map(|(a, b, cov2)| {
            let norms = contraction_norms(elements[a], elements[b])?;
            let (r_idx, max) = norms
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, x)| {
                    if x > best.1 {
                        (i, x)
                    } else {
                        best
                    }
                });
            Ok(PairRecord {
                left: matrix.labels[a],
                right: matrix.labels[b],
                cov2,
                contraction_norms: norms,
                max_contraction_norm: max,
                r_argmax: r_idx + 1,
            })
        })
        .collect()
}

/// Largest value of a criterion quantity and where it occurs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub value: f64,
    pub left: ElementLabel,
    pub right: ElementLabel,
    /// Contraction index for condition (2); `None` for condition (1).
    pub r: Option<usize>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionCheck {
    pub tol: f64,
    /// Every cross-group `Cov(F_a^2, F_b^2) < tol`.
    pub squared_covariance: Witness,
    /// Every cross-group `||f_a ⊗_r f_b|| < tol`.
    pub contraction: Witness,
    pub pairs: Vec<PairRecord>,
}

impl CriterionCheck {
    pub fn passed(&self) -> bool {
        self.squared_covariance.pass && self.contraction.pass
    }
}

pub fn criterion_check(v: &ChaosVector, tol: f64) -> Result<CriterionCheck> {
    let matrix = squared_cov_matrix(v)?;
    criterion_check_with(v, &matrix, tol)
}

pub(crate) fn criterion_check_with(
    v: &ChaosVector,
    matrix: &SquaredCovMatrix,
    tol: f64,
) -> Result<CriterionCheck> {
    if !(tol > 0.0) {
        return Err(IndependenceError::InvalidTolerance(tol));
    }
    let pairs = pair_records_with(v, matrix)?;
    let first = pairs.first().expect("a chaos vector has a cross pair");
    let mut cov = (first.cov2, first);
    let mut con = (first.max_contraction_norm, first);
    for p in &pairs[1..] {
        if p.cov2 > cov.0 {
            cov = (p.cov2, p);
        }
        if p.max_contraction_norm > con.0 {
            con = (p.max_contraction_norm, p);
        }
    }
    Ok(CriterionCheck {
        tol,
        squared_covariance: Witness {
            value: cov.0,
            left: cov.1.left,
            right: cov.1.right,
            r: None,
            pass: cov.0 < tol,
        },
        contraction: Witness {
            value: con.0,
            left: con.1.left,
            right: con.1.right,
            r: Some(con.1.r_argmax),
            pass: con.0 < tol,
        },
        pairs,
    })
}

/// One univariate function list per group. A function is applied to a
/// multi-element group as the product over the group's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dictionary {
    groups: Vec<Vec<TestFunction>>,
}

impl Dictionary {
    pub fn new(groups: Vec<Vec<TestFunction>>) -> Self {
        Self { groups }
    }

    /// [`default_functions`] for each of `d` groups.
    pub fn default_for(d: usize) -> Self {
        Self {
            groups: vec![default_functions(); d],
        }
    }

    pub fn groups(&self) -> &[Vec<TestFunction>] {
        &self.groups
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.groups.len() != d {
            return Err(IndependenceError::DictionaryShape {
                expected: d,
                found: self.groups.len(),
            });
        }
        if let Some(group) = self.groups.iter().position(Vec::is_empty) {
            return Err(IndependenceError::EmptyDictionary { group });
        }
        Ok(())
    }

    pub fn num_tuples(&self) -> usize {
        self.groups.iter().map(Vec::len).product()
    }

    /// Function indices of tuple `t`; the last group varies fastest.
    pub fn tuple(&self, mut t: usize) -> Vec<usize> {
        let mut out = vec![0; self.groups.len()];
        for (j, fs) in self.groups.iter().enumerate().rev() {
            out[j] = t % fs.len();
            t /= fs.len();
        }
        out
    }

    pub fn tuple_names(&self, t: usize) -> Vec<String> {
        self.tuple(t)
            .iter()
            .zip(&self.groups)
            .map(|(&i, fs)| fs[i].to_string())
            .collect()
    }
}

/// Estimated dependence for one dictionary tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleGap {
    pub functions: Vec<String>,
    /// `E[prod psi_j] - prod E[psi_j]` (signed).
    pub gap: f64,
    pub stderr: f64,
}

impl TupleGap {
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.gap.abs() / self.stderr
        } else if self.gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceEstimate {
    pub samples: usize,
    pub seed: u64,
    pub blocks: usize,
    pub tuples: Vec<TupleGap>,
    /// Index of the tuple with the largest `|gap|`.
    pub argmax: usize,
    /// Largest `|gap|` over tuples.
    pub gap: f64,
    /// Standard error of the tuple attaining `gap`.
    pub stderr: f64,
    /// Largest `|gap| / stderr` over tuples.
    pub max_z: f64,
}

impl DependenceEstimate {
    /// Every tuple within `k` standard errors of zero.
    pub fn all_within(&self, k: f64) -> bool {
        self.max_z <= k
    }
}

struct BlockSums {
    rows: usize,
    single: Vec<Vec<f64>>,
    joint: Vec<f64>,
}

/// Monte Carlo estimate of `|E[prod_j psi_j(F_j)] - prod_j E[psi_j(F_j)]|`
/// for every tuple of the dictionary product.
pub fn empirical_dependence(
    v: &ChaosVector,
    dict: &Dictionary,
    samples: usize,
    seed: u64,
) -> Result<DependenceEstimate> {
    empirical_dependence_with(v, dict, samples, seed, Execution::default())
}

pub fn empirical_dependence_with(
    v: &ChaosVector,
    dict: &Dictionary,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<DependenceEstimate> {
    dict.validate(v.num_groups())?;
    if samples < MIN_SAMPLES {
        return Err(IndependenceError::TooFewSamples {
            samples,
            min: MIN_SAMPLES,
        });
    }
    let batch = SampleBatch::new(seed, v.space().dim(), samples)?;
    let tuples: Vec<Vec<usize>> = (0..dict.num_tuples()).map(|t| dict.tuple(t)).collect();
    let groups: Vec<&[ChaosElement]> = v.groups.iter().map(|g| g.elements.as_slice()).collect();

    let per_block = montecarlo::map_blocks(&batch, exec, |stream| {
        let mut sums = BlockSums {
            rows: stream.len(),
            single: dict.groups.iter().map(|fs| vec![0.0; fs.len()]).collect(),
            joint: vec![0.0; tuples.len()],
        };
        let mut values: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
        let mut phi: Vec<Vec<f64>> = dict.groups.iter().map(|fs| vec![0.0; fs.len()]).collect();
        stream.for_each_row(|x| {
            for (vals, els) in values.iter_mut().zip(&groups) {
                for (slot, el) in vals.iter_mut().zip(els.iter()) {
                    *slot = el.evaluate_unchecked(x);
                }
            }
            for ((p, fs), vals) in phi.iter_mut().zip(&dict.groups).zip(&values) {
                for (slot, psi) in p.iter_mut().zip(fs) {
                    *slot = vals.iter().map(|&y| psi.eval(y)).product();
                }
            }
            for (s, p) in sums.single.iter_mut().zip(&phi) {
                for (a, b) in s.iter_mut().zip(p) {
                    *a += b;
                }
            }
            for (acc, idx) in sums.joint.iter_mut().zip(&tuples) {
                let mut prod = 1.0;
                for (p, &i) in phi.iter().zip(idx) {
                    prod *= p[i];
                }
                *acc += prod;
            }
        });
        sums
    });

    let gap_of = |rows: usize, single: &[Vec<f64>], joint: f64, idx: &[usize]| {
        let n = rows as f64;
        let product: f64 = single.iter().zip(idx).map(|(s, &i)| s[i] / n).product();
        joint / n - product
    };

    let mut total = BlockSums {
        rows: 0,
        single: dict.groups.iter().map(|fs| vec![0.0; fs.len()]).collect(),
        joint: vec![0.0; tuples.len()],
    };
    for b in &per_block {
        total.rows += b.rows;
        for (s, bs) in total.single.iter_mut().zip(&b.single) {
            for (a, x) in s.iter_mut().zip(bs) {
                *a += x;
            }
        }
        for (a, x) in total.joint.iter_mut().zip(&b.joint) {
            *a += x;
        }
    }

    let blocks = per_block.len();
    let mut out = Vec::with_capacity(tuples.len());
    for (t, idx) in tuples.iter().enumerate() {
        let gap = gap_of(total.rows, &total.single, total.joint[t], idx);
        let block_values: Vec<f64> = per_block
            .iter()
            .map(|b| gap_of(b.rows, &b.single, b.joint[t], idx))
            .collect();
        let mean = block_values.iter().sum::<f64>() / blocks as f64;
        let var = block_values
            .iter()
            .map(|g| (g - mean) * (g - mean))
            .sum::<f64>()
            / (blocks - 1) as f64;
        out.push(TupleGap {
            functions: dict.tuple_names(t),
            gap,
            stderr: (var / blocks as f64).sqrt(),
        });
    }

    let mut argmax = 0;
    for (t, g) in out.iter().enumerate() {
        if g.gap.abs() > out[argmax].gap.abs() {
            argmax = t;
        }
    }
    let max_z = out.iter().map(TupleGap::z_score).fold(0.0, f64::max);
    Ok(DependenceEstimate {
        samples,
        seed,
        blocks,
        gap: out[argmax].gap.abs(),
        stderr: out[argmax].stderr,
        argmax,
        max_z,
        tuples: out,
    })
}

/// Empirical lower estimate of the constant in
/// `|E[prod psi_j] - prod E psi_j| <= c ||psi_d'|| prod_{j<d} ||psi_j||_{q_1} sum Cov(F_j^2, F_l^2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRatio {
    pub ratio: f64,
    /// Tuple attaining the ratio.
    pub tuple: usize,
    pub functions: Vec<String>,
    pub gap: f64,
    pub norm_factor: f64,
    pub cov_sum: f64,
}

/// Ratio of each tuple's empirical gap to the right-hand side of the bound
/// (without the constant), maximized over tuples.
pub fn bound_ratio(
    v: &ChaosVector,
    dict: &Dictionary,
    matrix: &SquaredCovMatrix,
    estimate: &DependenceEstimate,
) -> Result<BoundRatio> {
    dict.validate(v.num_groups())?;
    for (a, b, c) in matrix.cross_pairs() {
        if !(c > 0.0) {
            return Err(IndependenceError::Degenerate {
                left: matrix.labels[a],
                right: matrix.labels[b],
            });
        }
    }
    let cov_sum = matrix.cross_sum();
    let q1 = v.groups[0].order;
    let d = v.num_groups();

    let mut best: Option<BoundRatio> = None;
    for (t, tg) in estimate.tuples.iter().enumerate() {
        let idx = dict.tuple(t);
        let mut norm_factor = 1.0;
        for j in 0..d {
            let psi = &dict.groups[j][idx[j]];
            let m = v.groups[j].len();
            let factor = if j + 1 == d {
                psi.product_gradient_bound(m).ok_or(1)
            } else {
                psi.product_norm(m, q1).ok_or(q1)
            };
            norm_factor *= factor.map_err(|order| IndependenceError::UnboundedNorm {
                function: psi.to_string(),
                order,
            })?;
        }
        let denom = norm_factor * cov_sum;
        let ratio = tg.gap.abs() / denom;
        if best.as_ref().is_none_or(|b| ratio > b.ratio) {
            best = Some(BoundRatio {
                ratio,
                tuple: t,
                functions: tg.functions.clone(),
                gap: tg.gap.abs(),
                norm_factor,
                cov_sum,
            });
        }
    }
    Ok(best.expect("dictionary is non-empty"))
}
