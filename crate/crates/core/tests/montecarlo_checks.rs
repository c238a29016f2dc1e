//! Statistical checks of the sampler and estimator against Gaussian moments.

use wiener_chaos::chaos::ChaosElement;
use wiener_chaos::hermite::{hermite, hermite_table};
use wiener_chaos::montecarlo::{estimate, estimate_with, map_blocks, Execution, SampleBatch};
use wiener_chaos::tensor::{factorial, HilbertSpace, RawTensor, SymmetricTensor};

#[test]
fn hermite_orthogonality() {
    let batch = SampleBatch::new(11, 1, 1_000_000).unwrap();
    // One pass accumulating every product H_p H_q, p, q <= 6.
    let sums = map_blocks(&batch, Execution::default(), |s| {
        let mut acc = vec![0.0; 49];
        let mut h = [0.0; 7];
        s.for_each_row(|x| {
            hermite_table(x[0], &mut h);
            for p in 0..7 {
                for q in 0..7 {
                    acc[p * 7 + q] += h[p] * h[q];
                }
            }
        });
        (acc, s.len())
    });
    for p in 0..7 {
        for q in p..7 {
            let blocks: Vec<(f64, usize)> = sums.iter().map(|(a, n)| (a[p * 7 + q], *n)).collect();
            let e = wiener_chaos::montecarlo::batch_means(&blocks).unwrap();
            let target = if p == q { 1.0 / factorial(q) as f64 } else { 0.0 };
            if p == 0 && q == 0 {
                assert_eq!(e.mean, 1.0);
                continue;
            }
            assert!(e.within(target, 4.0), "p={p} q={q}: {e:?} vs {target}");
        }
    }
}

#[test]
fn first_chaos_variance() {
    let s = HilbertSpace::new(3).unwrap();
    let z = ChaosElement::coordinate(s, 1).unwrap();
    let batch = SampleBatch::new(3, 3, 500_000).unwrap();
    let e = estimate(&batch, |x| z.evaluate_unchecked(x).powi(2)).unwrap();
    assert!(e.within(1.0, 4.0), "{e:?}");
}

#[test]
fn second_chaos_fourth_moment() {
    // (Z^2 - 1)/sqrt 2 has fourth moment E[(Z^2 - 1)^4]/4 = 60/4.
    let s = HilbertSpace::new(1).unwrap();
    let f = ChaosElement::new(SymmetricTensor::basis_power(s, 0, 2).unwrap().scale(1.0 / 2f64.sqrt()))
        .unwrap();
    assert!(f.is_standardized());
    let batch = SampleBatch::new(4, 1, 2_000_000).unwrap();
    let e = estimate(&batch, |x| f.evaluate_unchecked(x).powi(4)).unwrap();
    assert!(e.within(15.0, 4.0), "{e:?}");
}

#[test]
fn product_of_coordinates_moments() {
    // I_2(sym(e_1 ⊗ e_2)) = X_1 X_2: second moment 1, fourth moment 9.
    let s = HilbertSpace::new(2).unwrap();
    let k = RawTensor::outer(s, &[&[(0, 1.0)], &[(1, 1.0)]]).unwrap().symmetrize();
    let f = ChaosElement::new(k).unwrap();
    let batch = SampleBatch::new(5, 2, 1_000_000).unwrap();
    let m2 = estimate(&batch, |x| f.evaluate_unchecked(x).powi(2)).unwrap();
    let m4 = estimate(&batch, |x| f.evaluate_unchecked(x).powi(4)).unwrap();
    assert!(m2.within(1.0, 4.0), "{m2:?}");
    assert!(m4.within(9.0, 4.0), "{m4:?}");
}

#[test]
fn evaluation_matches_hermite_identity() {
    // I_q(e^{⊗q}) = q! H_q(X(e)) on every drawn row.
    let s = HilbertSpace::new(2).unwrap();
    let batch = SampleBatch::new(6, 2, 1000).unwrap();
    for q in 1..=6 {
        let f = ChaosElement::new(SymmetricTensor::basis_power(s, 1, q).unwrap()).unwrap();
        let block = batch.block(0);
        for x in block.rows() {
            let expect = factorial(q) as f64 * hermite(q, x[1]);
            assert!((f.evaluate_unchecked(x) - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}

#[test]
fn serial_and_parallel_agree_bitwise() {
    let s = HilbertSpace::new(4).unwrap();
    let k = RawTensor::outer(s, &[&[(0, 1.0), (3, 0.5)], &[(1, 1.0)], &[(2, -1.0)]])
        .unwrap()
        .symmetrize();
    let f = ChaosElement::new(k).unwrap().normalize().unwrap();
    let batch = SampleBatch::new(21, 4, 300_000).unwrap();
    let serial = estimate_with(&batch, Execution::Serial, |x| f.evaluate_unchecked(x).powi(2)).unwrap();
    let default = estimate_with(&batch, Execution::default(), |x| f.evaluate_unchecked(x).powi(2)).unwrap();
    assert_eq!(serial.mean.to_bits(), default.mean.to_bits());
    assert_eq!(serial.stderr.to_bits(), default.stderr.to_bits());
}

#[test]
fn seeds_and_parameters_pin_the_draws() {
    let a = SampleBatch::new(1, 3, 100).unwrap();
    let b = SampleBatch::new(1, 3, 100).unwrap();
    let c = SampleBatch::new(2, 3, 100).unwrap();
    assert_eq!(a.block(0).as_slice(), b.block(0).as_slice());
    assert_ne!(a.block(0).row(0)[0], c.block(0).row(0)[0]);
}
