use std::fmt::Write as _;

use serde::Serialize;

use super::{
    bound_ratio, criterion_check_with, empirical_dependence_with, squared_cov_matrix, BoundRatio,
    ChaosVector, CriterionCheck, DependenceEstimate, Dictionary, IndependenceError, Result,
    SquaredCovMatrix,
};
use crate::montecarlo::{Execution, GENERATOR_TAG};

/// Everything computed for one chaos vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub dimension: usize,
    pub orders: Vec<usize>,
    pub elements: usize,
    pub generator: &'static str,
    pub matrix: SquaredCovMatrix,
    pub check: CriterionCheck,
    pub dependence: Option<DependenceEstimate>,
    pub bound_ratio: Option<BoundRatio>,
}

impl IndependenceReport {
    /// Exact quantities only.
    pub fn exact(v: &ChaosVector, tol: f64) -> Result<Self> {
        let matrix = squared_cov_matrix(v)?;
        let check = criterion_check_with(v, &matrix, tol)?;
        Ok(Self {
            dimension: v.space().dim(),
            orders: v.orders(),
            elements: v.len(),
            generator: GENERATOR_TAG,
            matrix,
            check,
            dependence: None,
            bound_ratio: None,
        })
    }

    /// Exact quantities plus a Monte Carlo dependence estimate. The bound
    /// ratio is left empty when it is undefined for this vector.
    pub fn with_simulation(
        v: &ChaosVector,
        tol: f64,
        dict: &Dictionary,
        samples: usize,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        let mut report = Self::exact(v, tol)?;
        let est = empirical_dependence_with(v, dict, samples, seed, exec)?;
        report.bound_ratio = match bound_ratio(v, dict, &report.matrix, &est) {
            Ok(r) => Some(r),
            Err(IndependenceError::Degenerate { .. } | IndependenceError::UnboundedNorm { .. }) => {
                None
            }
            Err(e) => return Err(e),
        };
        report.dependence = Some(est);
        Ok(report)
    }

    pub fn passed(&self) -> bool {
        self.check.passed()
    }

    /// One row per cross-group pair, labels 1-based.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("pair_i,pair_j,cov2,max_contraction_norm,r_argmax\n");
        for p in &self.check.pairs {
            writeln!(
                out,
                "{},{},{:e},{:e},{}",
                p.left, p.right, p.cov2, p.max_contraction_norm, p.r_argmax
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::ChaosElement;
    use crate::tensor::HilbertSpace;

    #[test]
    fn csv_lists_cross_pairs() {
        let s = HilbertSpace::new(2).unwrap();
        let a = ChaosElement::coordinate(s, 0).unwrap();
        let b = ChaosElement::coordinate(s, 1).unwrap();
        let v = ChaosVector::new(vec![vec![a.clone(), b.clone()], vec![a]]).unwrap();
        let r = IndependenceReport::exact(&v, 1e-6).unwrap();
        let csv = r.pairs_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1.1,2.1,2e0,1e0,1");
        assert_eq!(lines[2], "1.2,2.1,0e0,0e0,1");
        assert!(!r.passed());
        assert!(r.to_json().contains("\"generator\": \"chacha8-as241-v1\""));
    }
}
