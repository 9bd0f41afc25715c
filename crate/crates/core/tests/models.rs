use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sst_core::isotonic::{assemble_estimate, UpperTriangleField};
use sst_core::matrix::{frobenius_mse, Kind, Matrix, Permutation, ProbabilityMatrix};
use sst_core::models::{
    generate, generate_sorted, holder_ratio_range, Family, ModelParams, ModelSpec,
};

fn perm(n: usize, seed: u64) -> Permutation {
    Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn matrix(n: usize, vals: &[f64]) -> Matrix {
    Matrix::from_fn(n, |i, j| vals[(i * n + j) % vals.len()])
}

proptest! {
    #[test]
    fn permutation_is_a_group_action(n in 1usize..9, a in any::<u64>(), b in any::<u64>(), vals in prop::collection::vec(0.0f64..1.0, 81)) {
        let m = matrix(n, &vals);
        let (pi, rho) = (perm(n, a), perm(n, b));
        let lhs = m.permuted(&pi).unwrap().permuted(&rho).unwrap();
        let rhs = m.permuted(&pi.compose(&rho).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn mse_is_permutation_invariant(n in 1usize..9, s in any::<u64>(), va in prop::collection::vec(0.0f64..1.0, 81), vb in prop::collection::vec(0.0f64..1.0, 81)) {
        let (a, b) = (matrix(n, &va), matrix(n, &vb));
        let pi = perm(n, s);
        let before = frobenius_mse(&a, &b).unwrap();
        let after = frobenius_mse(&a.permuted(&pi).unwrap(), &b.permuted(&pi).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-15 * before.max(1.0));
    }

    #[test]
    fn sorted_tournament_survives_triangle_round_trip(seed in any::<u64>(), n in 2usize..12) {
        let theta = generate_sorted(&ModelSpec::new(Family::RandomMonotone, n, seed)).unwrap();
        prop_assert!(theta.is_member_sorted());
        let back = assemble_estimate(&UpperTriangleField::from_matrix(theta.matrix()), Kind::Tournament).unwrap();
        prop_assert!(back.is_member_sorted());
        prop_assert_eq!(back, theta);
    }
}

fn families() -> Vec<ModelParams> {
    let mut out = vec![
        ModelParams::new(Family::WorstCase),
        ModelParams::new(Family::ConstantHalf),
        ModelParams {
            k: Some(2),
            ..ModelParams::new(Family::Block)
        },
        ModelParams {
            k: Some(3),
            kind: Some(Kind::Graph),
            ..ModelParams::new(Family::Block)
        },
        ModelParams::new(Family::GeneralizedBradleyTerry),
        ModelParams::new(Family::GeneralizedBeta),
        ModelParams::new(Family::Holder),
        ModelParams {
            alpha: Some(0.5),
            l: Some(2.0),
            ..ModelParams::new(Family::Holder)
        },
        ModelParams::new(Family::LowerHolder),
        ModelParams::new(Family::RandomMonotone),
        ModelParams {
            kind: Some(Kind::Graph),
            ..ModelParams::new(Family::RandomMonotone)
        },
    ];
    out[4].m = Some(1.0);
    out
}

#[test]
fn generated_models_lie_in_parameter_space() {
    for params in families() {
        for n in [6, 12, 30] {
            for seed in 0..5 {
                let spec = ModelSpec {
                    n,
                    seed,
                    params: params.clone(),
                };
                let (theta, pi) = generate(&spec).unwrap();
                assert!(theta.is_member_sorted(), "{}", params.label());
                let shown = theta.permuted(&pi).unwrap();
                assert!(shown.is_member_parameter_space(), "{}", params.label());
                let again = generate(&spec).unwrap();
                assert_eq!(again, (theta, pi));
            }
        }
    }
}

#[test]
fn gbt_entries_are_skew_complementary() {
    let theta = generate_sorted(&ModelSpec::new(Family::GeneralizedBradleyTerry, 25, 4)).unwrap();
    for i in 0..25 {
        for j in 0..25 {
            if i != j {
                assert!((theta.get(i, j) + theta.get(j, i) - 1.0).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn holder_constants_hold() {
    for (alpha, l) in [(1.0, 1.0), (0.5, 1.0), (2.0, 0.5)] {
        for kind in [Kind::Tournament, Kind::Graph] {
            let spec = ModelSpec {
                n: 40,
                seed: 0,
                params: ModelParams {
                    alpha: Some(alpha),
                    l: Some(l),
                    kind: Some(kind),
                    ..ModelParams::new(Family::Holder)
                },
            };
            let theta = generate_sorted(&spec).unwrap();
            let (max, _) = holder_ratio_range(&theta, alpha);
            assert!(max <= l + 1e-9, "alpha={alpha} {kind}: {max}");
        }
    }
    let lower = generate_sorted(&ModelSpec::new(Family::LowerHolder, 40, 0)).unwrap();
    let (max, min) = holder_ratio_range(&lower, 1.0);
    assert!(max <= 1.0 + 1e-9 && min >= 0.5 - 1e-9, "{max} {min}");
}

#[test]
fn block_rows_have_at_most_k_values() {
    for k in [1, 2, 4] {
        let spec = ModelSpec {
            n: 16,
            seed: 3,
            params: ModelParams {
                k: Some(k),
                ..ModelParams::new(Family::Block)
            },
        };
        let theta = generate_sorted(&spec).unwrap();
        for i in 0..16 {
            let mut vals: Vec<u64> = (0..16)
                .filter(|&j| j != i)
                .map(|j| theta.get(i, j).to_bits())
                .collect();
            vals.sort_unstable();
            vals.dedup();
            assert!(vals.len() <= k, "k={k} row {i}: {}", vals.len());
        }
    }
}

#[test]
fn constant_half_is_half() {
    let theta = generate_sorted(&ModelSpec::new(Family::ConstantHalf, 5, 0)).unwrap();
    assert_eq!(theta, ProbabilityMatrix::half(Kind::Tournament, 5));
}
