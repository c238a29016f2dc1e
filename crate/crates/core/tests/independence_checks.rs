//! Monte Carlo dependence estimates against closed forms.
//!
//! For an order-2 family element, `F = X(e_a) X(u)` with
//! `X(u) = alpha Y + w Z`, where `Z` is the shared coordinate. Conditioning
//! on `Z`, `E[cos(omega F) | Z] = k exp(-beta Z^2)` with
//! `k = (1 + omega^2 alpha^2)^{-1/2}` and
//! `beta = omega^2 w^2 / (2 (1 + omega^2 alpha^2))`, and sin/tanh terms
//! vanish by symmetry. Gaps of cos/cos tuples are covariances of two such
//! functions of `Z`; every other tuple has gap zero.

use wiener_chaos::independence::{
    bound_ratio, criterion_check, empirical_dependence, squared_cov_matrix, Dictionary, Shape,
    TestFunction, STDERR_BAND,
};
use wiener_chaos::sequences::{generate, Family, FamilySpec};

fn gauss_exp(beta: f64) -> f64 {
    1.0 / (1.0 + 2.0 * beta).sqrt()
}

fn cos_factor(omega: f64, w: f64) -> (f64, f64) {
    let a2 = 1.0 - w * w;
    let s = 1.0 + omega * omega * a2;
    (1.0 / s.sqrt(), omega * omega * w * w / (2.0 * s))
}

fn exact_cos_gap(o1: f64, w1: f64, o2: f64, w2: f64) -> f64 {
    let (k1, b1) = cos_factor(o1, w1);
    let (k2, b2) = cos_factor(o2, w2);
    k1 * k2 * (gauss_exp(b1 + b2) - gauss_exp(b1) * gauss_exp(b2))
}

fn vanishing(theta: f64, n: usize) -> FamilySpec {
    FamilySpec::new(Family::VanishingOverlap, vec![2, 2], theta, n)
}

#[test]
fn family_gaps_match_closed_form() {
    for (family, theta, n) in [
        (Family::VanishingOverlap, 1.0, 2),
        (Family::PersistentOverlap, 0.5, 1),
    ] {
        let v = generate(&FamilySpec::new(family, vec![2, 2], theta, n)).unwrap();
        let w1 = theta / 2f64.sqrt();
        let w2 = match family {
            Family::PersistentOverlap => theta,
            _ => theta / (n as f64).sqrt(),
        };
        let dict = Dictionary::default_for(2);
        let est = empirical_dependence(&v, &dict, 1_000_000, 77).unwrap();
        let mut nonzero = 0;
        for (t, gap) in est.tuples.iter().enumerate() {
            let idx = dict.tuple(t);
            let (f, g) = (dict.groups()[0][idx[0]], dict.groups()[1][idx[1]]);
            let exact = match (f.shape, g.shape) {
                (Shape::Cos { omega: o1 }, Shape::Cos { omega: o2 }) => {
                    nonzero += 1;
                    exact_cos_gap(o1, w1, o2, w2)
                }
                _ => 0.0,
            };
            assert!(
                (gap.gap - exact).abs() <= STDERR_BAND * gap.stderr,
                "{family} {:?}: {} vs {exact} (se {})",
                gap.functions,
                gap.gap,
                gap.stderr
            );
        }
        assert_eq!(nonzero, 9);
    }
}

#[test]
fn persistent_cos_gap_is_resolved() {
    let v = generate(&FamilySpec::new(Family::PersistentOverlap, vec![2, 2], 0.5, 1)).unwrap();
    let dict = Dictionary::new(vec![vec![TestFunction::cos(1.0)], vec![TestFunction::cos(2.0)]]);
    let est = empirical_dependence(&v, &dict, 1_000_000, 3).unwrap();
    let exact = exact_cos_gap(1.0, 0.5 / 2f64.sqrt(), 2.0, 0.5);
    assert!(exact > STDERR_BAND * est.stderr, "{exact} vs se {}", est.stderr);
    assert!((est.gap - exact.abs()).abs() <= STDERR_BAND * est.stderr);
}

#[test]
fn disjoint_gap_is_noise() {
    let v = generate(&FamilySpec::new(Family::Disjoint, vec![2, 1], 0.0, 3)).unwrap();
    let est = empirical_dependence(&v, &Dictionary::default_for(2), 200_000, 8).unwrap();
    assert!(est.all_within(STDERR_BAND), "max z {}", est.max_z);
}

#[test]
fn doubling_samples_shrinks_stderr() {
    let v = generate(&vanishing(1.0, 4)).unwrap();
    let dict = Dictionary::default_for(2);
    let a = empirical_dependence(&v, &dict, 200_000, 12).unwrap();
    let b = empirical_dependence(&v, &dict, 400_000, 12).unwrap();
    let mut ratios: Vec<f64> = a
        .tuples
        .iter()
        .zip(&b.tuples)
        .map(|(x, y)| y.stderr / x.stderr)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    let expect = 1.0 / 2f64.sqrt();
    assert!((median / expect - 1.0).abs() <= 0.2, "median ratio {median}");
}

#[test]
fn bound_ratio_is_homogeneous_in_last_function() {
    let v = generate(&vanishing(1.0, 4)).unwrap();
    let m = squared_cov_matrix(&v).unwrap();
    let base = Dictionary::default_for(2);
    let lambda = 3.0;
    let scaled = Dictionary::new(vec![
        base.groups()[0].clone(),
        base.groups()[1].iter().map(|f| f.scaled(lambda)).collect(),
    ]);
    let ea = empirical_dependence(&v, &base, 100_000, 5).unwrap();
    let eb = empirical_dependence(&v, &scaled, 100_000, 5).unwrap();
    let a = bound_ratio(&v, &base, &m, &ea).unwrap();
    let b = bound_ratio(&v, &scaled, &m, &eb).unwrap();
    assert!((a.ratio - b.ratio).abs() <= 1e-9 * a.ratio, "{} vs {}", a.ratio, b.ratio);
    assert_eq!(a.tuple, b.tuple);
}

#[test]
fn witnesses_and_gap_decrease_along_vanishing_family() {
    let dict = Dictionary::default_for(2);
    let mut prev: Option<(f64, f64, f64)> = None;
    for n in [2usize, 8, 32, 128] {
        let v = generate(&vanishing(1.0, n)).unwrap();
        let w = criterion_check(&v, 1e-6).unwrap().squared_covariance.value;
        let est = empirical_dependence(&v, &dict, 400_000, 31).unwrap();
        if let Some((pw, pg, pse)) = prev {
            assert!(w <= pw, "n={n}: witness {w} > {pw}");
            let band = STDERR_BAND * (pse * pse + est.stderr * est.stderr).sqrt();
            assert!(est.gap <= pg + band, "n={n}: gap {} > {pg} + {band}", est.gap);
        }
        prev = Some((w, est.gap, est.stderr));
    }
}

#[test]
fn multi_element_groups_are_supported() {
    let spec = FamilySpec::new(Family::VanishingOverlap, vec![2, 1], 1.0, 4).with_sizes(vec![2, 2]);
    let v = generate(&spec).unwrap();
    let dict = Dictionary::default_for(2);
    let m = squared_cov_matrix(&v).unwrap();
    assert_eq!(m.cross_pairs().count(), 4);
    let est = empirical_dependence(&v, &dict, 50_000, 2).unwrap();
    let r = bound_ratio(&v, &dict, &m, &est).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert!(r.norm_factor > 0.0);
}
