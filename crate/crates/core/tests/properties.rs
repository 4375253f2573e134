mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triqsvm::anneal::{self, AnnealSchedule};
use triqsvm::datagen::{adhoc_generate, AdhocGenerator, Dataset, Label};
use triqsvm::kernel::Kernel;
use triqsvm::optimize::{cobyla_minimize, OptimizerConfig};
use triqsvm::qkernel::{self, DataMap, FeatureMapSpec, PhaseAngles, StateVector};
use triqsvm::qubo::{
    self, build_qubo_dual, build_qubo_paper, compute_beta, QuboBuilder, QuboMatrix, TrainedModel,
};

const TWO_PI: f64 = 2.0 * PI;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TWO_PI, n)
}

fn theta(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-TWO_PI..=TWO_PI, n)
}

fn data_map() -> impl Strategy<Value = DataMap> {
    prop_oneof![Just(DataMap::ZzOffset), Just(DataMap::ZzScaled)]
}

fn labels(n: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(prop_oneof![Just(Label::Positive), Just(Label::Negative)], n)
}

fn random_points(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| vec![rng.random_range(0.0..TWO_PI), rng.random_range(0.0..TWO_PI)])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_states_are_normalised(n in 1usize..5, seed in any::<u64>(), map in data_map()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TWO_PI)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-TWO_PI..TWO_PI)).collect();
        let spec = FeatureMapSpec::new(n, t, map).unwrap();
        let s = qkernel::feature_state(&x, &spec).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_bounded_symmetric_and_repeatable(x in point(2), z in point(2), t in theta(2), map in data_map()) {
        let spec = FeatureMapSpec::new(2, t, map).unwrap();
        let k = qkernel::kernel_entry(&x, &z, &spec).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&k));
        prop_assert!((k - qkernel::kernel_entry(&z, &x, &spec).unwrap()).abs() < 1e-12);
        prop_assert_eq!(k.to_bits(), qkernel::kernel_entry(&x, &z, &spec).unwrap().to_bits());
        prop_assert!((qkernel::kernel_entry(&x, &x, &spec).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gram_is_psd(m in 1usize..=30, seed in any::<u64>(), t in theta(2), map in data_map()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(m, &mut rng);
        let g = qkernel::gram(&pts, &FeatureMapSpec::new(2, t, map).unwrap()).unwrap();
        prop_assert!(common::min_eigenvalue(g.as_slice(), m) >= -1e-8);
        for i in 0..m {
            prop_assert!((g.get(i, i) - 1.0).abs() < 1e-10);
            for j in 0..m {
                prop_assert_eq!(g.get(i, j).to_bits(), g.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn phase_evolution_only_changes_phases(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
        one in prop::collection::vec(-10.0f64..10.0, 3),
        two in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let raw: Vec<num_complex::Complex64> = amps.iter().map(|(r, i)| num_complex::Complex64::new(*r, *i)).collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let normed: Vec<_> = raw.iter().map(|a| a / norm).collect();
        let mut s = StateVector::from_amplitudes(normed.clone()).unwrap();
        s.apply_phase_evolution(&PhaseAngles { one_body: one, two_body: two }).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&normed) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn paper_qubo_shape(seed in any::<u64>(), ys in labels(8), t in theta(2)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(8, &mut rng);
        let g = qkernel::gram(&pts, &FeatureMapSpec::new(2, t, DataMap::ZzOffset).unwrap()).unwrap();
        let q = build_qubo_paper(&g, &ys).unwrap();
        for i in 0..8 {
            prop_assert_eq!(q.get(i, i), 0.0);
            for j in 0..8 {
                prop_assert_eq!(q.get(i, j), q.get(j, i));
                prop_assert!(q.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn dual_qubo_energy_is_negated_dual_objective(n in 1usize..=10, seed in any::<u64>(), penalty in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(n, &mut rng);
        let ys: Vec<Label> = (0..n).map(|_| if rng.random::<bool>() { Label::Positive } else { Label::Negative }).collect();
        let g = qkernel::gram(&pts, &FeatureMapSpec::unparametrised(2).unwrap()).unwrap();
        let q = build_qubo_dual(&g, &ys, penalty).unwrap();
        for bits in 0u32..(1 << n) {
            let alpha: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
            let ay: Vec<f64> = (0..n).map(|i| alpha[i] as f64 * ys[i].value()).collect();
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += ay[i] * g.get(i, j) * ay[j];
                }
            }
            let count = alpha.iter().map(|&a| a as f64).sum::<f64>();
            let expected = -(count - 0.5 * quad) + penalty * count;
            let e = anneal::energy(&q, &alpha).unwrap();
            prop_assert!((e - expected).abs() < 1e-9 * (1.0 + expected.abs()), "{e} vs {expected}");
        }
    }

    #[test]
    fn beta_is_affine_in_labels(seed in any::<u64>(), ys in labels(6), zs in labels(6)) {
        // β(y) = mean(y) − mean_n Σₘ αₘ yₘ K[m][n] is linear in y, so
        // β(y) + β(z) = β applied to the elementwise sum by the direct formula.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(6, &mut rng);
        let alpha: Vec<u8> = (0..6).map(|_| u8::from(rng.random::<bool>())).collect();
        let g = qkernel::gram(&pts, &FeatureMapSpec::unparametrised(2).unwrap()).unwrap();
        let direct = |y: &[f64]| -> f64 {
            (0..6).map(|n| y[n] - (0..6).map(|m| alpha[m] as f64 * y[m] * g.get(m, n)).sum::<f64>()).sum::<f64>() / 6.0
        };
        let yv: Vec<f64> = ys.iter().map(|l| l.value()).collect();
        let zv: Vec<f64> = zs.iter().map(|l| l.value()).collect();
        let sum: Vec<f64> = yv.iter().zip(&zv).map(|(a, b)| a + b).collect();
        let by = compute_beta(&alpha, &ys, &g).unwrap();
        let bz = compute_beta(&alpha, &zs, &g).unwrap();
        prop_assert!((by - direct(&yv)).abs() < 1e-12);
        prop_assert!((by + bz - direct(&sum)).abs() < 1e-12);
    }

    #[test]
    fn classify_invariant_under_positive_scaling(seed in any::<u64>(), c in 0.01f64..100.0) {
        // With the linear kernel, scaling training points and β by c scales the decision value by c.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(6, &mut rng);
        let ys: Vec<Label> = (0..6).map(|i| if i % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        let alpha: Vec<u8> = (0..6).map(|_| u8::from(rng.random::<bool>())).collect();
        let beta = rng.random_range(-1.0..1.0);
        let ds = Dataset::new("a", pts.clone(), ys.clone()).unwrap();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * c).collect()).collect();
        let ds_c = Dataset::new("b", scaled, ys).unwrap();
        let m = TrainedModel::new(alpha.clone(), beta, &ds, Kernel::Linear, QuboBuilder::Paper).unwrap();
        let mc = TrainedModel::new(alpha, beta * c, &ds_c, Kernel::Linear, QuboBuilder::Paper).unwrap();
        for q in random_points(10, &mut rng) {
            let v = qubo::decision_value(&q, &m).unwrap();
            prop_assume!(v.abs() > 1e-9);
            prop_assert_eq!(qubo::classify(&q, &m).unwrap(), qubo::classify(&q, &mc).unwrap());
        }
    }

    #[test]
    fn energy_matches_double_loop(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = QuboMatrix::from_flat(n, flat.clone()).unwrap();
        let alpha: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e += alpha[i] as f64 * flat[i * n + j] * alpha[j] as f64;
            }
        }
        prop_assert_eq!(anneal::energy(&q, &alpha).unwrap(), e);
    }

    #[test]
    fn best_energy_never_increases_within_a_read(n in 2usize..16, seed in any::<u64>(), read in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = QuboMatrix::from_flat(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let schedule = AnnealSchedule { num_reads: 4, sweeps: 200, seed, ..Default::default() };
        let trace = anneal::anneal_trace(&q, &schedule, read).unwrap();
        prop_assert_eq!(trace.len(), 200);
        prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cobyla_respects_budget(seed in any::<u64>(), max_evals in 1usize..40, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x0: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut calls = 0;
        let r = cobyla_minimize(
            |x| {
                calls += 1;
                x.iter().zip(&centre).map(|(a, b)| (a - b).powi(2)).sum()
            },
            &x0,
            &vec![(-TWO_PI, TWO_PI); p],
            &OptimizerConfig { max_evals, ..Default::default() },
        ).unwrap();
        prop_assert!(calls <= max_evals);
        prop_assert_eq!(r.evals, calls);
        prop_assert!(r.x.iter().all(|v| (-TWO_PI..=TWO_PI).contains(v)));
    }

    #[test]
    fn generated_points_in_domain_and_outside_gap(seed in 0u64..1000, m in 1usize..40) {
        let g = AdhocGenerator::new(2, 0.6, seed).unwrap();
        let ds = g.sample(m, seed).unwrap();
        prop_assert_eq!(ds.len(), m);
        for (p, l) in ds.points().iter().zip(ds.labels()) {
            prop_assert!(p.iter().all(|v| *v > 0.0 && *v <= TWO_PI));
            let e = g.expectation(p).unwrap();
            prop_assert!(e.abs() > 0.6);
            prop_assert_eq!(*l, Label::from_sign(e));
        }
    }
}

#[test]
fn generator_is_seed_deterministic_and_balanced() {
    let a = adhoc_generate(500, 0.6, 2, 42).unwrap();
    let b = adhoc_generate(500, 0.6, 2, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_ne!(a, adhoc_generate(500, 0.6, 2, 43).unwrap());
    for l in [Label::Positive, Label::Negative] {
        assert!(a.count(l) >= 50, "{l}: {}", a.count(l));
    }
}

#[test]
fn annealer_beats_or_ties_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut wins = 0;
    for inst in 0..50u64 {
        let q = QuboMatrix::from_flat(12, (0..144).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let sa = anneal::simulated_anneal(
            &q,
            &AnnealSchedule {
                seed: inst,
                ..Default::default()
            },
        )
        .unwrap();
        let greedy = anneal::greedy_descent(&q, inst).unwrap();
        if sa.best_energy <= greedy.best_energy + 1e-12 {
            wins += 1;
        }
    }
    assert!(wins >= 45, "annealer matched or beat greedy on {wins}/50");
}
