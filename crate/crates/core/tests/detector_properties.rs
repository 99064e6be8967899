use coordetect::afriat::{afriat_matrix, relaxed_system};
use coordetect::detector::{
    phi_hat, phi_hat_from_matrix, phi_star, psi_from_draws, run_trial, sample_psi, tail_statistic,
    type1_mc, EmpiricalCdf, Regime, DEFAULT_TOL,
};
use coordetect::forward::{apply_noise, generate_coordinated, sample_noise, GenerationConfig};
use coordetect::rng::{child_seed, substream};
use coordetect::{NoiseModel, Probe};
use proptest::prelude::*;

/// Largest bottleneck `min_e (−a_e)` over all directed cycles, via the
/// widest-path closure.
fn bottleneck_cycle(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            (0..n)
                .map(|s| if s == t { f64::NEG_INFINITY } else { -a[t][s] })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = w[i][k].min(w[k][j]);
                if via > w[i][j] {
                    w[i][j] = via;
                }
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    for t in 0..n {
        for s in 0..n {
            if s != t {
                best = best.max(w[t][s].min(w[s][t]));
            }
        }
    }
    best
}

/// Largest violation of the shifted system, each inequality measured
/// relative to its largest term once that exceeds 1. Near the infimum the
/// multipliers grow like `1/(Φ − Φ̂)`, so an absolute bound would be below
/// double-precision resolution.
fn relative_violation(u: &[f64], lambda: &[f64], a: &[Vec<f64>], phi: f64) -> f64 {
    let n = u.len();
    let mut worst = f64::NEG_INFINITY;
    for t in 0..n {
        for s in (0..n).filter(|&s| s != t) {
            let term = lambda[t] * (a[t][s] + phi);
            let scale = 1f64.max(u[s].abs()).max(u[t].abs()).max(term.abs());
            worst = worst.max((u[s] - u[t] - term) / scale);
        }
    }
    worst
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=7).prop_flat_map(|t| prop::collection::vec(prop::collection::vec(-2.0..2.0f64, t), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn phi_hat_is_the_bottleneck_cycle(a in matrix()) {
        let p = phi_hat_from_matrix(&a, 0, DEFAULT_TOL).unwrap();
        let oracle = bottleneck_cycle(&a);
        prop_assert!((p.value - oracle).abs() <= 1e-7, "bisection {} vs oracle {}", p.value, oracle);
        prop_assert!(p.certificate.lambda.iter().all(|&l| l >= 1.0 - 1e-9));
        let c = &p.certificate;
        prop_assert!(relative_violation(&c.u, &c.lambda, &a, p.value) <= 1e-8);
        prop_assert!(c.u.iter().copied().fold(f64::INFINITY, f64::min) == 1.0);
    }

    #[test]
    fn relaxed_feasibility_is_monotone(a in matrix()) {
        let p = phi_hat_from_matrix(&a, 0, DEFAULT_TOL).unwrap();
        for d in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
            prop_assert!(relaxed_system(&a, p.value + d).unwrap().is_some(), "infeasible at +{}", d);
        }
        for d in [1e-6, 1e-3, 0.1, 1.0] {
            prop_assert!(relaxed_system(&a, p.value - d).unwrap().is_none(), "feasible at -{}", d);
        }
    }

    #[test]
    fn statistic_is_nonincreasing(samples in prop::collection::vec(-1.0..1.0f64, 1..50), x in -1.5..1.5f64, d in 0.0..1.0f64) {
        let cdf = EmpiricalCdf::new(samples).unwrap();
        prop_assert!(tail_statistic(&cdf, x + d) <= tail_statistic(&cdf, x));
    }
}

#[test]
fn phi_hat_matches_oracle_on_generated_data() {
    for seed in 0..40 {
        let clean = generate_coordinated(&GenerationConfig::reference(seed)).unwrap();
        let draws = sample_noise(
            10,
            3,
            2,
            &NoiseModel::gaussian(0.05).unwrap(),
            &mut substream(seed, 1),
        )
        .unwrap();
        for ds in [clean.clone(), apply_noise(&clean, &draws).unwrap()] {
            for i in 0..3 {
                let a = afriat_matrix(&ds, i).unwrap();
                let p = phi_hat(&ds, i, DEFAULT_TOL).unwrap();
                let oracle = bottleneck_cycle(&a);
                // The certificate makes the value an upper bound.
                assert!(
                    p.value >= oracle - 1e-9 && p.value <= oracle + 1e-7,
                    "seed {seed} agent {}: {} vs {oracle}",
                    i + 1,
                    p.value
                );
                let c = &p.certificate;
                assert!(relative_violation(&c.u, &c.lambda, &a, p.value) <= 1e-8);
            }
        }
    }
}

#[test]
fn clean_coordinated_data_needs_no_perturbation() {
    for seed in 0..20 {
        let ds = generate_coordinated(&GenerationConfig::reference(seed)).unwrap();
        let r = phi_star(&ds, DEFAULT_TOL).unwrap();
        assert!(r.phi_star <= 1e-6, "seed {seed}: {}", r.phi_star);
        assert_eq!(
            r.phi_star,
            r.per_radar
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        );
    }
}

#[test]
fn perturbation_is_bounded_by_the_noise_term() {
    let noise = NoiseModel::gaussian(0.05).unwrap();
    for k in 0..100 {
        let seed = child_seed(2024, k);
        let clean = generate_coordinated(&GenerationConfig::reference(seed)).unwrap();
        let draws = sample_noise(10, 3, 2, &noise, &mut substream(seed, 1)).unwrap();
        let noisy = apply_noise(&clean, &draws).unwrap();
        let (psi, _) = psi_from_draws(noisy.probes(), &draws);
        for (i, bound) in psi.iter().enumerate() {
            let p = phi_hat(&noisy, i, DEFAULT_TOL).unwrap();
            assert!(
                p.value <= bound + 1e-9,
                "trial {k} agent {}: {} > {bound}",
                i + 1,
                p.value
            );
        }
    }
}

#[test]
fn noise_bound_is_nonnegative_at_reference_scale() {
    let probes = generate_coordinated(&GenerationConfig::reference(3))
        .unwrap()
        .probes()
        .to_vec();
    let cdf = sample_psi(
        &probes,
        3,
        &NoiseModel::gaussian(0.1).unwrap(),
        100_000,
        &mut substream(3, 7),
    )
    .unwrap();
    assert!(
        cdf.samples()[0] >= -1e-12,
        "min sample {}",
        cdf.samples()[0]
    );
}

#[test]
fn noise_bound_can_be_negative_for_opposed_probes() {
    // Both pair terms are negative: α₁'δ = −0.9 and α₂'(−δ) = −0.9.
    let probes = vec![Probe(vec![1.0, 0.1]), Probe(vec![0.1, 1.0])];
    let draws = vec![vec![vec![-0.5, 0.5]], vec![vec![0.5, -0.5]]];
    let (_, psi) = psi_from_draws(&probes, &draws);
    assert!((psi + 0.9).abs() < 1e-12);
}

#[test]
fn zero_noise_gives_zero_samples() {
    let probes = generate_coordinated(&GenerationConfig::reference(1))
        .unwrap()
        .probes()
        .to_vec();
    let cdf = sample_psi(
        &probes,
        3,
        &NoiseModel::gaussian(0.0).unwrap(),
        50,
        &mut substream(1, 0),
    )
    .unwrap();
    assert!(cdf.samples().iter().all(|&s| s == 0.0));
}

#[test]
fn trials_are_deterministic() {
    let gen = GenerationConfig::reference(0);
    let noise = NoiseModel::gaussian(0.05).unwrap();
    for regime in [Regime::Coordinated, Regime::Noncoordinated] {
        let a = run_trial(regime, &gen, &noise, 0.1, 200, 77, DEFAULT_TOL).unwrap();
        let b = run_trial(regime, &gen, &noise, 0.1, 200, 77, DEFAULT_TOL).unwrap();
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        assert_eq!(a.relaxed.phi_star.to_bits(), b.relaxed.phi_star.to_bits());
    }
    let par = type1_mc(&gen, &noise, 0.1, 12, 100, 5).unwrap();
    let serial: Vec<f64> = (0..12)
        .map(|k| {
            run_trial(
                Regime::Coordinated,
                &gen,
                &noise,
                0.1,
                100,
                child_seed(5, k),
                DEFAULT_TOL,
            )
            .unwrap()
            .statistic
        })
        .collect();
    assert_eq!(par.statistics, serial);
}
