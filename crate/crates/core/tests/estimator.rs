use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sst_core::estimator::{estimate, EstimatorConfig};
use sst_core::matrix::{frobenius_mse, Kind, Permutation};
use sst_core::models::{
    generate, generate_sorted, Family, LatentPermutation, ModelParams, ModelSpec,
};
use sst_core::observation::{
    debias, filled_row_sums, ranking_permutation, sample, ObservationMatrix, Outcome,
};

fn relabel(obs: &ObservationMatrix, rho: &Permutation) -> ObservationMatrix {
    let n = obs.n();
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (rho.apply(i), rho.apply(j));
            upper.push(if a < b {
                obs.get(a, b)
            } else {
                match (obs.get(b, a), obs.kind()) {
                    (Outcome::One, Kind::Tournament) => Outcome::Zero,
                    (Outcome::Zero, Kind::Tournament) => Outcome::One,
                    (o, _) => o,
                }
            });
        }
    }
    ObservationMatrix::new(obs.kind(), n, upper).unwrap()
}

fn distinct(xs: &[f64]) -> bool {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] != w[1])
}

#[test]
fn estimate_is_label_equivariant() {
    // integer row sums at p = 1 are rarely distinct beyond tiny tournaments;
    // missing cells add half-integer fills and make tie-free samples common
    let setups = [
        (5, 1.0, Kind::Tournament),
        (6, 0.8, Kind::Tournament),
        (6, 0.8, Kind::Graph),
    ];
    for (n, p, kind) in setups {
        let mut checked = 0;
        for seed in 0..2000u64 {
            let spec = ModelSpec::new(Family::RandomMonotone, n, seed).with_kind(kind);
            let (theta, pi) = generate(&spec).unwrap();
            let obs = sample(&theta.permuted(&pi).unwrap(), p, seed).unwrap();
            if !distinct(&filled_row_sums(&obs)) {
                continue;
            }
            let rho = Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed + 1));
            let cfg = EstimatorConfig::default();
            let base = estimate(&obs, &cfg).unwrap().theta;
            let moved = estimate(&relabel(&obs, &rho), &cfg).unwrap().theta;
            assert_eq!(moved, base.permuted(&rho).unwrap(), "seed {seed} {kind}");
            checked += 1;
        }
        assert!(
            checked >= 10,
            "only {checked} tie-free samples for n={n} p={p} {kind}"
        );
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn risk_does_not_depend_on_latent_permutation() {
    let n = 30;
    let theta = generate_sorted(&ModelSpec::new(Family::RandomMonotone, n, 8)).unwrap();
    let shuffled = Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(99));
    let risks = |pi: &Permutation, offset: u64| -> Vec<f64> {
        let truth = theta.permuted(pi).unwrap();
        (0..500u64)
            .map(|r| {
                let obs = sample(&truth, 0.7, offset + r).unwrap();
                let est =
                    estimate(&obs, &EstimatorConfig::default().with_tie_seed(offset + r)).unwrap();
                frobenius_mse(est.theta.matrix(), truth.matrix()).unwrap()
            })
            .collect()
    };
    let a = risks(&Permutation::identity(n), 0);
    let b = risks(&shuffled, 1_000_000);
    // critical value at level 0.01 for two samples of 500
    let critical = 1.628 * (2.0f64 / 500.0).sqrt();
    let d = ks_statistic(&a, &b);
    assert!(d < critical, "KS statistic {d} >= {critical}");
}

#[test]
fn estimates_lie_in_parameter_space() {
    let models = [
        ModelParams::new(Family::WorstCase),
        ModelParams {
            k: Some(3),
            ..ModelParams::new(Family::Block)
        },
        ModelParams::new(Family::GeneralizedBradleyTerry),
        ModelParams::new(Family::GeneralizedBeta),
        ModelParams::new(Family::Holder),
        ModelParams {
            kind: Some(Kind::Graph),
            ..ModelParams::new(Family::RandomMonotone)
        },
    ];
    for params in models {
        for (seed, p) in [(0, 0.2), (1, 0.5), (2, 1.0)] {
            let spec = ModelSpec {
                n: 24,
                seed,
                params: params.clone(),
            };
            let (theta, pi) = generate(&spec).unwrap();
            let obs = sample(&theta.permuted(&pi).unwrap(), p, seed).unwrap();
            let est = estimate(&obs, &EstimatorConfig::default()).unwrap();
            assert!(!est.fallback);
            assert!(est.theta.is_member_parameter_space(), "{}", params.label());
        }
    }
}

#[test]
fn identity_latent_gives_sorted_truth() {
    let spec = ModelSpec::new(Family::WorstCase, 10, 3).with_latent(LatentPermutation::Identity);
    let (_, pi) = generate(&spec).unwrap();
    assert!(pi.is_identity());
}

fn obs_strategy() -> impl Strategy<Value = ObservationMatrix> {
    (2usize..12, any::<bool>()).prop_flat_map(|(n, graph)| {
        let kind = if graph { Kind::Graph } else { Kind::Tournament };
        prop::collection::vec(
            prop_oneof![
                Just(Outcome::One),
                Just(Outcome::Zero),
                Just(Outcome::Missing)
            ],
            n * (n - 1) / 2,
        )
        .prop_map(move |u| ObservationMatrix::new(kind, n, u).unwrap())
    })
}

proptest! {
    #[test]
    fn debias_keeps_structure(obs in obs_strategy(), p in 0.05f64..1.0) {
        let d = debias(&obs, p).unwrap();
        let n = obs.n();
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in i + 1..n {
                match obs.kind() {
                    Kind::Tournament => prop_assert!((d.get(j, i) - (1.0 - d.get(i, j))).abs() < 1e-12),
                    Kind::Graph => prop_assert_eq!(d.get(j, i), d.get(i, j)),
                }
            }
        }
    }

    #[test]
    fn tournament_row_sums_total_pairs(obs in obs_strategy()) {
        if obs.kind() == Kind::Tournament {
            let n = obs.n();
            let total: f64 = filled_row_sums(&obs).iter().sum();
            prop_assert_eq!(total, (n * (n - 1) / 2) as f64);
        }
    }

    #[test]
    fn ranking_is_a_bijection(sums in prop::collection::vec(prop_oneof![Just(1.0), Just(2.0), 0.0f64..5.0], 1..40), seed in any::<u64>()) {
        let sigma = ranking_permutation(&sums, seed);
        let mut seen = sigma.as_slice().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..sums.len()).collect::<Vec<_>>());
        for w in sigma.as_slice().windows(2) {
            prop_assert!(sums[w[0]] <= sums[w[1]]);
        }
    }
}
