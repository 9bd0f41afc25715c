use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sst_core::isotonic::{project_triangle, ProjectionOptions, UpperTriangleField};
use sst_core::matrix::Kind;
use sst_core::models::{generate_sorted, Family, ModelSpec};
use sst_core::oracle::{oracle_project, OracleOptions};

fn project(f: &UpperTriangleField, kind: Kind) -> UpperTriangleField {
    project_triangle(f, kind, ProjectionOptions::default())
        .unwrap()
        .0
}

fn cells(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Pairs `(a, b)` of cell indices with `x[a] <= x[b]` required.
fn order_pairs(n: usize, kind: Kind) -> Vec<(usize, usize)> {
    let cs = cells(n);
    let idx = |i: usize, j: usize| cs.iter().position(|&c| c == (i, j)).unwrap();
    let mut out = Vec::new();
    for &(i, j) in &cs {
        if j + 1 < n {
            match kind {
                Kind::Tournament => out.push((idx(i, j + 1), idx(i, j))),
                Kind::Graph => out.push((idx(i, j), idx(i, j + 1))),
            }
        }
        if i + 1 < j {
            out.push((idx(i, j), idx(i + 1, j)));
        }
    }
    out
}

/// Isotonic regression by the max-min formula over upper and lower sets,
/// then clipped to the box.
fn minmax_projection(v: &[f64], n: usize, kind: Kind) -> Vec<f64> {
    let m = v.len();
    let pairs = order_pairs(n, kind);
    let subsets: Vec<u32> = (1..1u32 << m).collect();
    let upper: Vec<u32> = subsets
        .iter()
        .copied()
        .filter(|&s| {
            pairs
                .iter()
                .all(|&(a, b)| s >> a & 1 == 0 || s >> b & 1 == 1)
        })
        .collect();
    let lower: Vec<u32> = subsets
        .iter()
        .copied()
        .filter(|&s| {
            pairs
                .iter()
                .all(|&(a, b)| s >> b & 1 == 0 || s >> a & 1 == 1)
        })
        .collect();
    let avg = |s: u32| {
        let (sum, cnt) = (0..m)
            .filter(|&c| s >> c & 1 == 1)
            .fold((0.0, 0.0), |(a, k), c| (a + v[c], k + 1.0));
        sum / cnt
    };
    (0..m)
        .map(|c| {
            let best = upper
                .iter()
                .filter(|&&u| u >> c & 1 == 1)
                .map(|&u| {
                    lower
                        .iter()
                        .filter(|&&l| l >> c & 1 == 1)
                        .map(|&l| avg(u & l))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            best.clamp(0.0, kind.upper_bound())
        })
        .collect()
}

fn field_strategy(n: usize) -> impl Strategy<Value = UpperTriangleField> {
    prop::collection::vec(-0.5f64..1.5, n * (n - 1) / 2)
        .prop_map(move |v| UpperTriangleField::new(n, v).unwrap())
}

fn kind_strategy() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Tournament), Just(Kind::Graph)]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn minmax_formula_matches_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=5 {
        for kind in [Kind::Tournament, Kind::Graph] {
            for _ in 0..40 {
                let f = UpperTriangleField::from_fn(n, |_, _| rng.gen_range(-0.5..1.5));
                let want = minmax_projection(f.values(), n, kind);
                let got = project(&f, kind);
                for (a, b) in got.values().iter().zip(&want) {
                    assert!((a - b).abs() < 1e-9, "n={n} {kind}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn clip_after_cone_matches_oracle_up_to_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 2..=6 {
        for kind in [Kind::Tournament, Kind::Graph] {
            for _ in 0..30 {
                let f = UpperTriangleField::from_fn(n, |_, _| rng.gen_range(-0.5..1.5));
                let oracle = oracle_project(&f, kind, OracleOptions::default()).unwrap();
                assert!(project(&f, kind).max_abs_diff(&oracle) < 1e-6);
            }
        }
    }
}

#[test]
fn dykstra_matches_partition_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [5, 9, 16] {
        for kind in [Kind::Tournament, Kind::Graph] {
            let f = UpperTriangleField::from_fn(n, |_, _| rng.gen_range(-0.5..1.5));
            let d = project_triangle(&f, kind, ProjectionOptions::dykstra(1e-12, 100_000))
                .unwrap()
                .0;
            assert!(project(&f, kind).max_abs_diff(&d) < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn output_is_feasible_and_idempotent(f in field_strategy(7), kind in kind_strategy()) {
        let x = project(&f, kind);
        prop_assert!(x.is_feasible(kind, 0.0));
        prop_assert!(x.values().iter().all(|v| (0.0..=kind.upper_bound()).contains(v)));
        let again = project(&x, kind);
        prop_assert!(again.max_abs_diff(&x) <= 2e-10);
    }

    #[test]
    fn non_expansive(f in field_strategy(6), g in field_strategy(6), kind in kind_strategy()) {
        let (pf, pg) = (project(&f, kind), project(&g, kind));
        prop_assert!(pf.distance(&pg) <= f.distance(&g) + 1e-12);
    }

    #[test]
    fn variational_inequality(f in field_strategy(6), kind in kind_strategy(), seed in 0u64..1_000_000) {
        let x = project(&f, kind);
        let theta = generate_sorted(&ModelSpec::new(Family::RandomMonotone, 6, seed).with_kind(kind)).unwrap();
        let t = UpperTriangleField::from_matrix(theta.matrix());
        let r: Vec<f64> = f.values().iter().zip(x.values()).map(|(a, b)| a - b).collect();
        let d: Vec<f64> = t.values().iter().zip(x.values()).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&r, &d) <= 1e-6 * f.distance(&t));
    }

    #[test]
    fn clipping_a_monotone_field_keeps_it_monotone(seed in 0u64..1_000_000, kind in kind_strategy(), lo in -0.5f64..0.2, hi in 0.3f64..1.5) {
        let theta = generate_sorted(&ModelSpec::new(Family::RandomMonotone, 8, seed).with_kind(kind)).unwrap();
        let f = UpperTriangleField::from_matrix(theta.matrix());
        let clipped = UpperTriangleField::new(8, f.values().iter().map(|v| v.clamp(lo, hi)).collect()).unwrap();
        prop_assert!(clipped.is_feasible(kind, 0.0));
    }
}
