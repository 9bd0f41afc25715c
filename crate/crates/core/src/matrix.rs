//! Dense matrices, permutations and the sorted parameter spaces.
//!
//! A [`ProbabilityMatrix`] is either a tournament matrix (`θ_ji = 1 − θ_ij`)
//! or a graph matrix (`θ_ji = θ_ij`), always with a zero diagonal. The
//! sorted spaces are
//!
//! * tournament: above the diagonal, rows are non-increasing as the column
//!   grows, columns are non-decreasing as the row grows, and every entry is
//!   at most 1/2 (player `n` is the strongest);
//! * graph: above the diagonal, non-decreasing in both indices.
//!
//! Indices are 0-based throughout the API. Anything printed for humans is
//! 1-based.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance applied to every inequality in the membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Largest `n` for which membership search enumerates orderings of tied rows.
const EXHAUSTIVE_TIE_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Tournament,
    Graph,
}

impl Kind {
    /// Value stored below the diagonal given the value above it.
    #[inline]
    pub fn mirror(self, upper: f64) -> f64 {
        match self {
            Kind::Tournament => 1.0 - upper,
            Kind::Graph => upper,
        }
    }

    /// Upper box bound for entries above the diagonal in the sorted space.
    #[inline]
    pub fn upper_bound(self) -> f64 {
        match self {
            Kind::Tournament => 0.5,
            Kind::Graph => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Tournament => "tournament",
            Kind::Graph => "graph",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tournament" => Ok(Kind::Tournament),
            "graph" => Ok(Kind::Graph),
            other => Err(Error::invalid(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// A bijection on `{0, .., n-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::invalid(format!(
                    "{map:?} is not a permutation of 0..{n}"
                )));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    /// Builds a permutation from 1-based images, as written in user input.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::invalid("1-based permutation contains 0"));
        }
        Permutation::new(images.iter().map(|&v| v - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// Uniformly random element of `S_n`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `π(i)`.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Function composition: `(self ∘ other)(i) = self(other(i))`.
    ///
    /// With this convention `θ∘(π∘ρ) = (θ∘π)∘ρ` for the matrix action
    /// `(θ∘π)_ij = θ_{π(i),π(j)}`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "cannot compose permutations of sizes {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Permutation {
            map: other.map.iter().map(|&i| self.map[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|&v| v + 1).collect()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (pos, v) in self.map.iter().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        f.write_str(")")
    }
}

/// Dense square matrix of reals, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl AsRef<Matrix> for Matrix {
    fn as_ref(&self) -> &Matrix {
        self
    }
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "row {} has {} entries, expected {n}",
                bad + 1,
                rows[bad].len()
            )));
        }
        Ok(Matrix {
            n,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// `(θ∘π)_ij = θ_{π(i),π(j)}`.
    pub fn permuted(&self, pi: &Permutation) -> Result<Matrix> {
        if pi.len() != self.n {
            return Err(Error::invalid(format!(
                "permutation of size {} applied to a {}x{} matrix",
                pi.len(),
                self.n,
                self.n
            )));
        }
        let map = pi.as_slice();
        let mut data = Vec::with_capacity(self.data.len());
        for &pi_i in map {
            let src = self.row(pi_i);
            data.extend(map.iter().map(|&pi_j| src[pi_j]));
        }
        Ok(Matrix { n: self.n, data })
    }

    /// Squared Frobenius distance `‖a − b‖²`.
    pub fn squared_distance(&self, other: &Matrix) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::invalid(format!(
                "matrix sizes differ: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Text form: `n` on the first line, then `n` comma separated rows,
    /// every value with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 24 + 16);
        writeln!(out, "{}", self.n).unwrap();
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension header `{header}`")))?;
        let mut rows = Vec::with_capacity(n);
        for (idx, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("row {}: bad number `{}`", idx + 1, tok.trim()))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Parse(format!(
                "header says n={n} but found {} rows",
                rows.len()
            )));
        }
        Matrix::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `(1/n²)·‖a − b‖²`.
pub fn frobenius_mse<A: AsRef<Matrix>, B: AsRef<Matrix>>(a: &A, b: &B) -> Result<f64> {
    let (a, b) = (a.as_ref(), b.as_ref());
    let n = a.n() as f64;
    Ok(a.squared_distance(b)? / (n * n))
}

/// A tournament or graph probability matrix with its structural invariants
/// checked at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    kind: Kind,
    values: Matrix,
}

impl AsRef<Matrix> for ProbabilityMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.values
    }
}

impl ProbabilityMatrix {
    pub fn new(kind: Kind, values: Matrix) -> Result<Self> {
        let n = values.n();
        if n == 0 {
            return Err(Error::invalid("matrix must have n >= 1"));
        }
        for i in 0..n {
            if values.get(i, i) != 0.0 {
                return Err(Error::invalid(format!(
                    "diagonal entry ({0},{0}) is {1}, expected 0",
                    i + 1,
                    values.get(i, i)
                )));
            }
            for j in 0..n {
                let v = values.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "entry ({},{}) = {v} outside [0,1]",
                        i + 1,
                        j + 1
                    )));
                }
                if i < j {
                    let expected = kind.mirror(v);
                    if (values.get(j, i) - expected).abs() > MEMBERSHIP_TOL {
                        return Err(Error::invalid(format!(
                            "entry ({},{}) = {} breaks the {kind} relation with ({},{}) = {v}",
                            j + 1,
                            i + 1,
                            values.get(j, i),
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(ProbabilityMatrix { kind, values })
    }

    /// Builds the full matrix from a rule for the entries above the diagonal.
    pub fn from_upper(
        kind: Kind,
        n: usize,
        mut upper: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = upper(i, j);
                m.set(i, j, v);
                m.set(j, i, kind.mirror(v));
            }
        }
        ProbabilityMatrix::new(kind, m)
    }

    /// Off-diagonal 1/2, diagonal 0: the matrix `J/2`.
    pub fn half(kind: Kind, n: usize) -> Self {
        ProbabilityMatrix::from_upper(kind, n, |_, _| 0.5).expect("J/2 is well formed")
    }

    #[inline]
    pub fn kind(&self) -> Kind {
        self.kind
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.row_sums()
    }

    pub fn permuted(&self, pi: &Permutation) -> Result<ProbabilityMatrix> {
        Ok(ProbabilityMatrix {
            kind: self.kind,
            values: self.values.permuted(pi)?,
        })
    }

    /// Membership in the sorted space (tournament or graph, per `kind`).
    pub fn is_member_sorted(&self) -> bool {
        let n = self.n();
        let m = &self.values;
        for i in 0..n {
            for j in i + 1..n {
                let v = m.get(i, j);
                let right = (j + 1 < n).then(|| m.get(i, j + 1));
                let below = (i + 1 < j).then(|| m.get(i + 1, j));
                let ok = match self.kind {
                    Kind::Tournament => {
                        v <= 0.5 + MEMBERSHIP_TOL
                            && right.is_none_or(|r| r <= v + MEMBERSHIP_TOL)
                            && below.is_none_or(|b| v <= b + MEMBERSHIP_TOL)
                    }
                    Kind::Graph => {
                        right.is_none_or(|r| v <= r + MEMBERSHIP_TOL)
                            && below.is_none_or(|b| v <= b + MEMBERSHIP_TOL)
                    }
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Membership in the permuted space `{θ∘π : θ sorted, π ∈ S_n}`.
    pub fn is_member_parameter_space(&self) -> bool {
        self.sorting_permutation().is_some()
    }

    /// A permutation `π` with `self∘π` in the sorted space, if one is found.
    ///
    /// Any valid `π` orders rows by non-decreasing row sum, so candidates are
    /// drawn from that ordering. Orderings inside groups of tied row sums are
    /// enumerated exhaustively for `n <= 8`; larger matrices only try the
    /// stable row-sum order.
    pub fn sorting_permutation(&self) -> Option<Permutation> {
        let n = self.n();
        let sums = self.row_sums();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]));
        let candidate = Permutation { map: order.clone() };
        if self.permuted(&candidate).ok()?.is_member_sorted() {
            return Some(candidate);
        }
        if n > EXHAUSTIVE_TIE_LIMIT {
            return None;
        }

        // Groups of consecutive (in sorted order) near-equal row sums.
        let tie_tol = 1e-9 * (n as f64).max(1.0);
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for pos in 1..=n {
            if pos == n || sums[order[pos]] - sums[order[pos - 1]] > tie_tol {
                groups.push((start, pos));
                start = pos;
            }
        }
        let mut current = order;
        self.search_tied_orders(&groups, 0, &mut current)
    }

    fn search_tied_orders(
        &self,
        groups: &[(usize, usize)],
        g: usize,
        current: &mut Vec<usize>,
    ) -> Option<Permutation> {
        if g == groups.len() {
            let candidate = Permutation {
                map: current.clone(),
            };
            return self
                .permuted(&candidate)
                .ok()
                .filter(ProbabilityMatrix::is_member_sorted)
                .map(|_| candidate);
        }
        let (lo, hi) = groups[g];
        if hi - lo == 1 {
            return self.search_tied_orders(groups, g + 1, current);
        }
        let mut found = None;
        for_each_permutation(&mut current[lo..hi].to_vec(), 0, &mut |slice| {
            if found.is_some() {
                return;
            }
            current[lo..hi].copy_from_slice(slice);
            found = self.search_tied_orders(groups, g + 1, current);
        });
        found
    }

    /// Entries strictly above the diagonal, row-major.
    pub fn upper_entries(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values.row(i)[i + 1..]);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.values.to_csv()
    }

    pub fn from_csv(kind: Kind, text: &str) -> Result<Self> {
        ProbabilityMatrix::new(kind, Matrix::from_csv(text)?)
    }
}

/// Heap's algorithm; calls `visit` once per ordering of `items[k..]`.
fn for_each_permutation(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k + 1 >= items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, visit);
        items.swap(k, i);
    }
}
