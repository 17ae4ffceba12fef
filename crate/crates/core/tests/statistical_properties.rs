//! Monte Carlo properties of the estimators under Gaussian and Haar inputs.

use bosonstat::estimators::{self, mockup_statistics};
use bosonstat::experiments::{q_rstar_independence, tilted_gap_identity};
use bosonstat::linalg::{haar_column_orthonormal, sample_gaussian_matrix};
use bosonstat::samplers::{sample_batch, ClassicalMockupSampler, FermionSampler, UniformSampler};
use bosonstat::stats::{self, DistributionSummary};
use bosonstat::{OutcomeSpace, RngStream};

#[test]
fn p_has_unit_mean_for_small_n() {
    for n in 2..=6 {
        let mut rng = RngStream::new(200 + n as u64, 0);
        let p: Vec<f64> = (0..50_000)
            .map(|_| estimators::p_statistic(&sample_gaussian_matrix(n, n, &mut rng).unwrap()).unwrap())
            .collect();
        let s = DistributionSummary::from_samples(&p).unwrap();
        assert!((s.mean - 1.0).abs() <= 3.0 * s.mean_se + 1e-3, "n={n}: mean {} se {}", s.mean, s.mean_se);
    }
}

#[test]
fn r_star_has_unit_mean_at_twenty() {
    let mut rng = RngStream::new(210, 0);
    let r: Vec<f64> = (0..100_000)
        .map(|_| estimators::r_star(&sample_gaussian_matrix(20, 20, &mut rng).unwrap()).unwrap())
        .collect();
    let mean = stats::mean(&r);
    assert!((mean - 1.0).abs() <= 0.05, "mean R* {mean}");
}

#[test]
fn q_has_unit_mean_at_five() {
    let mut rng = RngStream::new(211, 0);
    let q: Vec<f64> = (0..100_000)
        .map(|_| estimators::q_statistic(&sample_gaussian_matrix(5, 5, &mut rng).unwrap()).unwrap())
        .collect();
    let mean = stats::mean(&q);
    assert!((mean - 1.0).abs() <= 0.05, "mean Q {mean}");
}

#[test]
fn q_and_r_star_are_independent() {
    for check in q_rstar_independence(5, 100_000, 212, 3.0).unwrap() {
        assert!(check.passed, "{check:?}");
    }
}

#[test]
fn tilted_acceptance_gap_matches_half_deviation() {
    let (check, lhs, rhs) = tilted_gap_identity(10, 100_000, 213, 3.0).unwrap();
    assert!(check.passed, "{check:?} lhs={lhs} rhs={rhs}");
    assert!(lhs > 0.1 && rhs > 0.1);
}

#[test]
fn tilted_rownorm_sampler_agrees_with_p_weighting() {
    // The exact Gamma(n+1) row-norm law and P-weighted Gaussian draws give
    // the same tilted acceptance probability.
    let n = 6;
    let mut rng = RngStream::new(214, 0);
    let draws = 200_000;
    let (mut num, mut den) = (0.0, 0.0);
    for _ in 0..draws {
        let x = sample_gaussian_matrix(n, n, &mut rng).unwrap();
        let p = estimators::p_statistic(&x).unwrap();
        den += p;
        if estimators::ln_r_star(&x).unwrap() >= 0.0 {
            num += p;
        }
    }
    let weighted = num / den;
    let mut rng = RngStream::new(215, 0);
    let hits = (0..draws)
        .filter(|_| estimators::ln_r_star(&estimators::sample_tilted_rownorm_matrix(n, &mut rng).unwrap()).unwrap() >= 0.0)
        .count();
    let direct = hits as f64 / draws as f64;
    assert!((weighted - direct).abs() < 0.015, "weighted {weighted} direct {direct}");
}

#[test]
fn mockup_streams_are_size_biased_against_uniform() {
    let (m, n) = (60, 4);
    let a = haar_column_orthonormal(m, n, &mut RngStream::new(216, 0)).unwrap();
    let draws = 1_000;
    let mut classical = ClassicalMockupSampler::new(&a).unwrap();
    let mut fermion = FermionSampler::new(&a).unwrap();
    let mut uniform = UniformSampler::new(OutcomeSpace::collision_free(m, n)).unwrap();
    let mb = sample_batch(&mut classical, draws, &mut RngStream::new(216, 1), None).unwrap();
    let fb = sample_batch(&mut fermion, draws, &mut RngStream::new(216, 2), None).unwrap();
    let ub = sample_batch(&mut uniform, draws, &mut RngStream::new(216, 3), None).unwrap();
    let ms = mockup_statistics(&a, &mb).unwrap();
    let fs = mockup_statistics(&a, &fb).unwrap();
    let us = mockup_statistics(&a, &ub).unwrap();

    let per = |v: &[estimators::MockupStatistics]| v.iter().map(|r| r.permanent_abs).collect::<Vec<_>>();
    let det = |v: &[estimators::MockupStatistics]| v.iter().map(|r| r.determinant_sq).collect::<Vec<_>>();
    assert!(stats::mann_whitney(&per(&ms), &per(&us)).unwrap().p_value < 0.01);
    assert!(stats::mann_whitney(&det(&fs), &det(&us)).unwrap().p_value < 0.01);
}

#[test]
fn verifier_decision_json_shape() {
    let a = haar_column_orthonormal(10, 2, &mut RngStream::new(217, 0)).unwrap();
    let mut uniform = UniformSampler::new(OutcomeSpace::collision_free(10, 2)).unwrap();
    let batch = sample_batch(&mut uniform, 5, &mut RngStream::new(217, 1), None).unwrap();
    let d = estimators::permanent_verifier(&a, &batch).unwrap();
    let v: serde_json::Value = serde_json::to_value(d).unwrap();
    for key in ["accept", "log_sum", "threshold", "k"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(d.accept, d.log_sum >= d.threshold);
}
