//! Observed comparison data: sampling with missing entries, filling,
//! row sums, debiasing and the ranking permutation.
//!
//! Only the strict upper triangle is stored. The lower triangle follows
//! from the kind (`y_ji = 1 - y_ij` for tournaments, `y_ji = y_ij` for
//! graphs) and inherits the upper triangle's missingness.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{Kind, Matrix, Permutation, ProbabilityMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    One,
    Zero,
    Missing,
}

impl Outcome {
    /// Value after filling missing entries with 1/2.
    pub fn filled(self) -> f64 {
        match self {
            Outcome::One => 1.0,
            Outcome::Zero => 0.0,
            Outcome::Missing => 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMatrix {
    n: usize,
    kind: Kind,
    upper: Vec<Outcome>,
}

impl ObservationMatrix {
    /// `upper` lists the cells `(i, j)`, `i < j`, row by row.
    pub fn new(kind: Kind, n: usize, upper: Vec<Outcome>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("observation matrix needs n >= 1"));
        }
        if upper.len() != n * (n - 1) / 2 {
            return Err(Error::invalid(format!(
                "n={n} needs {} upper entries, got {}",
                n * (n - 1) / 2,
                upper.len()
            )));
        }
        Ok(ObservationMatrix { n, kind, upper })
    }

    pub fn all_missing(kind: Kind, n: usize) -> Result<Self> {
        Self::new(kind, n, vec![Outcome::Missing; n * n.saturating_sub(1) / 2])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn upper(&self) -> &[Outcome] {
        &self.upper
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Outcome of the upper cell `(i, j)`; requires `i < j`.
    pub fn get(&self, i: usize, j: usize) -> Outcome {
        assert!(i < j && j < self.n, "({i}, {j}) is not an upper cell");
        self.upper[self.offset(i, j)]
    }

    pub fn observed_count(&self) -> usize {
        self.upper
            .iter()
            .filter(|o| **o != Outcome::Missing)
            .count()
    }

    pub fn pair_count(&self) -> usize {
        self.upper.len()
    }

    /// Fraction of observed pairs; 0 when `n = 1`.
    pub fn p_hat(&self) -> f64 {
        if self.upper.is_empty() {
            0.0
        } else {
            self.observed_count() as f64 / self.upper.len() as f64
        }
    }

    /// `p_hat < 1/n`, decided in integers as `observed * n < C(n, 2)`.
    pub fn too_sparse(&self) -> bool {
        self.observed_count() * self.n < self.upper.len()
    }

    /// Full data matrix with missing entries filled by 1/2 and a zero diagonal.
    pub fn filled(&self) -> Matrix {
        let mut y = Matrix::zeros(self.n);
        let mut k = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let v = self.upper[k].filled();
                y.set(i, j, v);
                y.set(j, i, self.kind.mirror(v));
                k += 1;
            }
        }
        y
    }

    /// Triplet CSV: a `# n=<n> kind=<kind>` line, the header `i,j,value`,
    /// then one 1-based row per observed upper cell.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n={} kind={}\ni,j,value\n", self.n, self.kind);
        let mut k = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                match self.upper[k] {
                    Outcome::One => writeln!(out, "{},{},1", i + 1, j + 1).unwrap(),
                    Outcome::Zero => writeln!(out, "{},{},0", i + 1, j + 1).unwrap(),
                    Outcome::Missing => {}
                }
                k += 1;
            }
        }
        out
    }

    /// Parses the triplet format. `kind` is used when the comment line
    /// does not name one; a conflicting kind is an error.
    pub fn from_csv(text: &str, kind: Option<Kind>) -> Result<Self> {
        let mut n = None;
        let mut file_kind = None;
        let mut triplets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for field in meta.split_whitespace() {
                    match field.split_once('=') {
                        Some(("n", v)) => {
                            n = Some(v.parse::<usize>().map_err(|_| {
                                Error::Parse(format!("line {}: bad n '{v}'", lineno + 1))
                            })?)
                        }
                        Some(("kind", v)) => file_kind = Some(v.parse::<Kind>()?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.replace(' ', "") == "i,j,value" {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Parse(format!("line {}: expected i,j,value", lineno + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let outcome = match parts[2] {
                "1" => Outcome::One,
                "0" => Outcome::Zero,
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: value must be 0 or 1, got '{other}'",
                        lineno + 1
                    )))
                }
            };
            triplets.push((lineno + 1, i, j, outcome));
        }
        let n = n.ok_or_else(|| Error::Parse("missing '# n=<n>' line".into()))?;
        let kind = match (file_kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::invalid(format!(
                    "file declares kind {a}, caller asked for {b}"
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Parse("kind not given".into())),
        };
        let mut obs = Self::all_missing(kind, n)?;
        for (line, i, j, outcome) in triplets {
            if !(1 <= i && i < j && j <= n) {
                return Err(Error::Parse(format!(
                    "line {line}: ({i},{j}) is not an upper cell of a {n}x{n} matrix"
                )));
            }
            let k = obs.offset(i - 1, j - 1);
            if obs.upper[k] != Outcome::Missing {
                return Err(Error::Parse(format!(
                    "line {line}: duplicate pair ({i},{j})"
                )));
            }
            obs.upper[k] = outcome;
        }
        Ok(obs)
    }
}

/// Samples each upper entry: observed with probability `p`, then
/// `Bernoulli(theta_ij)`.
pub fn sample_with<R: Rng + ?Sized>(
    theta: &ProbabilityMatrix,
    p: f64,
    rng: &mut R,
) -> Result<ObservationMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1], got {p}")));
    }
    let n = theta.n();
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let observed = rng.gen::<f64>() < p;
            let win = rng.gen::<f64>() < theta.get(i, j);
            upper.push(match (observed, win) {
                (false, _) => Outcome::Missing,
                (true, true) => Outcome::One,
                (true, false) => Outcome::Zero,
            });
        }
    }
    ObservationMatrix::new(theta.kind(), n, upper)
}

pub fn sample(theta: &ProbabilityMatrix, p: f64, seed: u64) -> Result<ObservationMatrix> {
    sample_with(theta, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Row sums of the filled data matrix.
pub fn filled_row_sums(obs: &ObservationMatrix) -> Vec<f64> {
    let n = obs.n;
    let mut r = vec![0.0; n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let v = obs.upper[k].filled();
            r[i] += v;
            r[j] += obs.kind.mirror(v);
            k += 1;
        }
    }
    r
}

/// `(y - 1/2) / p_used + 1/2` off the diagonal of the filled matrix, 0 on it.
pub fn debias(obs: &ObservationMatrix, p_used: f64) -> Result<Matrix> {
    if !(p_used > 0.0) || !p_used.is_finite() {
        return Err(Error::invalid(format!(
            "p_used must be positive, got {p_used}"
        )));
    }
    let y = obs.filled();
    Ok(Matrix::from_fn(obs.n, |i, j| {
        if i == j {
            0.0
        } else {
            (y.get(i, j) - 0.5) / p_used + 0.5
        }
    }))
}

/// Permutation `s` with `r[s(0)] <= r[s(1)] <= ...`; tied values appear
/// in uniformly random order.
pub fn ranking_permutation_with<R: Rng + ?Sized>(row_sums: &[f64], rng: &mut R) -> Permutation {
    let mut order: Vec<usize> = (0..row_sums.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| row_sums[a].total_cmp(&row_sums[b]));
    Permutation::new(order).expect("a shuffled index list is a bijection")
}

pub fn ranking_permutation(row_sums: &[f64], seed: u64) -> Permutation {
    ranking_permutation_with(row_sums, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn worst_case(n: usize) -> ProbabilityMatrix {
        ProbabilityMatrix::from_upper(Kind::Tournament, n, |_, _| 0.25).unwrap()
    }

    #[test]
    fn degenerate_probabilities() {
        let zero = ProbabilityMatrix::from_upper(Kind::Tournament, 6, |_, _| 0.0).unwrap();
        let obs = sample(&zero, 1.0, 3).unwrap();
        assert!(obs.upper().iter().all(|o| *o == Outcome::Zero));
        assert_eq!(obs.p_hat(), 1.0);
        let one = ProbabilityMatrix::from_upper(Kind::Graph, 6, |_, _| 1.0).unwrap();
        let obs = sample(&one, 1.0, 3).unwrap();
        assert!(obs.upper().iter().all(|o| *o == Outcome::One));
    }

    #[test]
    fn missing_fraction_matches_p() {
        let obs = sample(&worst_case(200), 0.5, 11).unwrap();
        let missing = 1.0 - obs.p_hat();
        assert!((missing - 0.5).abs() <= 0.035, "missing fraction {missing}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let theta = worst_case(30);
        assert_eq!(
            sample(&theta, 0.4, 9).unwrap(),
            sample(&theta, 0.4, 9).unwrap()
        );
        assert_ne!(
            sample(&theta, 0.4, 9).unwrap(),
            sample(&theta, 0.4, 10).unwrap()
        );
        assert!(sample(&theta, 0.0, 1).is_err());
        assert!(sample(&theta, 1.5, 1).is_err());
    }

    #[test]
    fn row_sum_examples() {
        let obs = ObservationMatrix::all_missing(Kind::Tournament, 3).unwrap();
        assert_eq!(filled_row_sums(&obs), vec![1.0, 1.0, 1.0]);
        let t = ObservationMatrix::new(Kind::Tournament, 2, vec![Outcome::One]).unwrap();
        assert_eq!(filled_row_sums(&t), vec![1.0, 0.0]);
        let g = ObservationMatrix::new(Kind::Graph, 2, vec![Outcome::One]).unwrap();
        assert_eq!(filled_row_sums(&g), vec![1.0, 1.0]);
    }

    #[test]
    fn tournament_row_sums_total_pair_count() {
        for seed in 0..20 {
            let obs = sample(&worst_case(17), 0.3, seed).unwrap();
            let total: f64 = filled_row_sums(&obs).iter().sum();
            assert_eq!(total, (17 * 16 / 2) as f64);
        }
    }

    #[test]
    fn debias_examples() {
        let obs = ObservationMatrix::new(
            Kind::Tournament,
            3,
            vec![Outcome::Missing, Outcome::One, Outcome::Zero],
        )
        .unwrap();
        let d = debias(&obs, 0.5).unwrap();
        assert_eq!(d.get(0, 1), 0.5);
        assert_eq!(d.get(0, 2), 1.5);
        assert_eq!(d.get(1, 2), -0.5);
        assert_eq!(d.get(2, 1), 1.5);
        assert_eq!(d.get(1, 1), 0.0);
        for p in [0.01, 0.3, 1.0] {
            assert_eq!(debias(&obs, p).unwrap().get(1, 0), 0.5);
        }
        assert!(debias(&obs, 0.0).is_err());
        assert!(debias(&obs, -1.0).is_err());
    }

    #[test]
    fn debias_keeps_structure() {
        let g = ProbabilityMatrix::from_upper(Kind::Graph, 12, |i, j| ((i + j) % 5) as f64 / 5.0)
            .unwrap();
        for (theta, seed) in [(worst_case(12), 1), (g, 2)] {
            let obs = sample(&theta, 0.35, seed).unwrap();
            let d = debias(&obs, 0.35).unwrap();
            for i in 0..12 {
                for j in 0..12 {
                    if i != j {
                        assert_eq!(d.get(j, i), theta.kind().mirror(d.get(i, j)));
                    }
                }
            }
        }
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(
            ranking_permutation(&[3.0, 1.0, 2.0], 0).to_one_based(),
            vec![2, 3, 1]
        );
        assert!(ranking_permutation(&[0.5, 1.0, 4.0, 9.0], 5).is_identity());
    }

    #[test]
    fn tie_break_is_uniform_over_s3() {
        let reps = 10_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for seed in 0..reps {
            let s = ranking_permutation(&[2.0, 2.0, 2.0], seed);
            *counts.entry(s.as_slice().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, c) in counts {
            let f = c as f64 / reps as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.02, "{perm:?}: {f}");
        }
    }

    #[test]
    fn triplet_csv_round_trip() {
        let obs = sample(&worst_case(9), 0.6, 4).unwrap();
        let text = obs.to_csv();
        assert!(text.starts_with("# n=9 kind=tournament\ni,j,value\n"));
        assert_eq!(ObservationMatrix::from_csv(&text, None).unwrap(), obs);
        assert_eq!(
            ObservationMatrix::from_csv(&text, Some(Kind::Tournament)).unwrap(),
            obs
        );
        assert!(ObservationMatrix::from_csv(&text, Some(Kind::Graph)).is_err());
    }

    #[test]
    fn triplet_csv_rejects_bad_rows() {
        let head = "# n=3 kind=graph\ni,j,value\n";
        assert!(ObservationMatrix::from_csv(&format!("{head}2,1,1\n"), None).is_err());
        assert!(ObservationMatrix::from_csv(&format!("{head}1,4,1\n"), None).is_err());
        assert!(ObservationMatrix::from_csv(&format!("{head}1,2,2\n"), None).is_err());
        assert!(ObservationMatrix::from_csv(&format!("{head}1,2,1\n1,2,0\n"), None).is_err());
        assert!(ObservationMatrix::from_csv("i,j,value\n1,2,1\n", Some(Kind::Graph)).is_err());
        let ok = ObservationMatrix::from_csv(&format!("{head}1,3,1\n"), None).unwrap();
        assert_eq!(ok.get(0, 2), Outcome::One);
        assert_eq!(ok.get(0, 1), Outcome::Missing);
    }

    #[test]
    fn sparse_threshold_is_exact() {
        // n=4: C(4,2)=6 pairs, threshold p_hat < 1/4 means fewer than 1.5 observed
        let mut upper = vec![Outcome::Missing; 6];
        let obs = ObservationMatrix::new(Kind::Tournament, 4, upper.clone()).unwrap();
        assert!(obs.too_sparse());
        upper[0] = Outcome::One;
        let obs = ObservationMatrix::new(Kind::Tournament, 4, upper.clone()).unwrap();
        assert!(obs.too_sparse());
        upper[1] = Outcome::Zero;
        let obs = ObservationMatrix::new(Kind::Tournament, 4, upper).unwrap();
        assert!(!obs.too_sparse());
    }
}
