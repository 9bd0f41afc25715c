//! Generators for the structured sub-classes of the sorted spaces.
//!
//! Every generator returns a sorted representative `θ*` together with a
//! latent permutation `π*`; the matrix the data are drawn from is
//! `θ* ∘ π*`. Random parts of `θ*` use stream 0 of the model seed and
//! `π*` uses stream 1, so changing the permutation policy never changes
//! `θ*`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Kind, Matrix, Permutation, ProbabilityMatrix, MEMBERSHIP_TOL};

/// Links are clamped to this distance from 0 and 1.
pub const LINK_CLAMP: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    WorstCase,
    ConstantHalf,
    Block,
    GeneralizedBradleyTerry,
    GeneralizedBeta,
    Holder,
    LowerHolder,
    RandomMonotone,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::WorstCase,
        Family::ConstantHalf,
        Family::Block,
        Family::GeneralizedBradleyTerry,
        Family::GeneralizedBeta,
        Family::Holder,
        Family::LowerHolder,
        Family::RandomMonotone,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::WorstCase => "worst-case",
            Family::ConstantHalf => "constant-half",
            Family::Block => "block",
            Family::GeneralizedBradleyTerry => "gbt",
            Family::GeneralizedBeta => "beta",
            Family::Holder => "holder",
            Family::LowerHolder => "lower-holder",
            Family::RandomMonotone => "random-monotone",
        }
    }

    /// Kind used when a spec does not name one.
    pub fn default_kind(self) -> Kind {
        match self {
            Family::GeneralizedBeta => Kind::Graph,
            _ => Kind::Tournament,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "worstcase" | "wc" => Family::WorstCase,
            "constanthalf" | "constant" => Family::ConstantHalf,
            "block" | "sbm" => Family::Block,
            "gbt" | "generalizedbradleyterry" | "bradleyterry" => Family::GeneralizedBradleyTerry,
            "beta" | "generalizedbeta" | "gbm" => Family::GeneralizedBeta,
            "holder" => Family::Holder,
            "lowerholder" => Family::LowerHolder,
            "randommonotone" => Family::RandomMonotone,
            _ => return Err(Error::invalid(format!("unknown model family `{s}`"))),
        })
    }
}

impl TryFrom<String> for Family {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.as_str().to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Link {
    Logistic,
    Probit,
}

impl Link {
    pub fn as_str(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }

    /// Distribution function, clamped to `[1e-15, 1 - 1e-15]`.
    pub fn cdf(self, x: f64) -> f64 {
        let v = match self {
            Link::Logistic => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2),
        };
        v.clamp(LINK_CLAMP, 1.0 - LINK_CLAMP)
    }

    pub fn density(self, x: f64) -> f64 {
        match self {
            Link::Logistic => {
                let f = self.cdf(x);
                f * (1.0 - f)
            }
            Link::Probit => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Largest and smallest density on `[-r, r]`. Both builtin densities are
    /// symmetric and unimodal at 0.
    pub fn density_range(self, r: f64) -> (f64, f64) {
        (self.density(0.0), self.density(r.abs()))
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logit" => Ok(Link::Logistic),
            "probit" | "normal" => Ok(Link::Probit),
            other => Err(Error::invalid(format!("unknown link function `{other}`"))),
        }
    }
}

impl TryFrom<String> for Link {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Link> for String {
    fn from(l: Link) -> String {
        l.as_str().to_string()
    }
}

/// Evaluates a builtin link by name.
pub fn builtin_link(id: &str, x: f64) -> Result<f64> {
    Ok(id.parse::<Link>()?.cdf(x))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentPermutation {
    Identity,
    #[default]
    Uniform,
}

/// Family parameters. Fields a family does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    /// Block count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Explicit `k x k` block core; drawn at random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub core: Option<Vec<Vec<f64>>>,
    /// Explicit weights; drawn uniformly from `[-m, m]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Upper Hölder constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Lower Hölder constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_lower: Option<f64>,
    #[serde(default)]
    pub latent: LatentPermutation,
}

impl ModelParams {
    pub fn new(family: Family) -> Self {
        ModelParams {
            family,
            kind: None,
            k: None,
            core: None,
            weights: None,
            m: None,
            link: None,
            alpha: None,
            l: None,
            l_lower: None,
            latent: LatentPermutation::Uniform,
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind.unwrap_or(self.family.default_kind())
    }

    pub fn m(&self) -> f64 {
        self.m.unwrap_or(1.0)
    }

    pub fn link(&self) -> Link {
        self.link.unwrap_or(Link::Logistic)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0)
    }

    pub fn l(&self) -> f64 {
        self.l.unwrap_or(1.0)
    }

    pub fn l_lower(&self) -> f64 {
        self.l_lower.unwrap_or(0.5 * self.l())
    }

    /// Short label such as `block-k2` or `gbt-logistic-m1`.
    pub fn label(&self) -> String {
        let mut s = self.family.as_str().to_string();
        match self.family {
            Family::Block => {
                if let Some(k) = self.k {
                    s.push_str(&format!("-k{k}"));
                }
            }
            Family::GeneralizedBradleyTerry | Family::GeneralizedBeta => {
                s.push_str(&format!("-{}-m{}", self.link(), self.m()));
            }
            Family::Holder => s.push_str(&format!("-a{}-l{}", self.alpha(), self.l())),
            Family::LowerHolder => s.push_str(&format!(
                "-a{}-l{}-{}",
                self.alpha(),
                self.l(),
                self.l_lower()
            )),
            _ => {}
        }
        if self.kind.is_some() && self.kind() != self.family.default_kind() {
            s.push_str(&format!("-{}", self.kind()));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub seed: u64,
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        ModelSpec {
            n,
            seed,
            params: ModelParams::new(family),
        }
    }

    pub fn with_kind(mut self, kind: Kind) -> Self {
        self.params.kind = Some(kind);
        self
    }

    pub fn with_latent(mut self, latent: LatentPermutation) -> Self {
        self.params.latent = latent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let n = self.n;
        if n == 0 {
            return Err(Error::invalid("model needs n >= 1"));
        }
        match p.family {
            Family::WorstCase | Family::GeneralizedBradleyTerry if p.kind() != Kind::Tournament => {
                return Err(Error::invalid(format!(
                    "{} is a tournament family",
                    p.family
                )))
            }
            Family::GeneralizedBeta if p.kind() != Kind::Graph => {
                return Err(Error::invalid("beta is a graph family"))
            }
            Family::Block => {
                let k = p.k.ok_or_else(|| Error::invalid("block model needs k"))?;
                if k == 0 || !n.is_multiple_of(k) {
                    return Err(Error::invalid(format!(
                        "block count k={k} must divide n={n}"
                    )));
                }
                if let Some(core) = &p.core {
                    check_core(core, k, p.kind())?;
                }
            }
            Family::Holder | Family::LowerHolder => {
                if !(p.alpha() > 0.0) || !(p.l() > 0.0) {
                    return Err(Error::invalid("Hölder models need alpha > 0 and L > 0"));
                }
                if p.family == Family::LowerHolder {
                    if !(p.l_lower() > 0.0) {
                        return Err(Error::invalid("lower Hölder constant must be positive"));
                    }
                    if p.l_lower() > p.l() {
                        return Err(Error::invalid(format!(
                            "lower Hölder constant {} exceeds upper constant {}",
                            p.l_lower(),
                            p.l()
                        )));
                    }
                }
            }
            _ => {}
        }
        if matches!(
            p.family,
            Family::GeneralizedBradleyTerry | Family::GeneralizedBeta
        ) {
            let m = p.m();
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::invalid(format!(
                    "weight bound M must be finite and >= 0, got {m}"
                )));
            }
            if let Some(w) = &p.weights {
                if w.len() != n {
                    return Err(Error::invalid(format!("{} weights for n={n}", w.len())));
                }
                if let Some(bad) = w.iter().find(|x| !(x.abs() <= m)) {
                    return Err(Error::invalid(format!("weight {bad} outside [-{m}, {m}]")));
                }
            }
        }
        Ok(())
    }
}

fn check_core(core: &[Vec<f64>], k: usize, kind: Kind) -> Result<()> {
    let bad = |msg: String| Err(Error::invalid(format!("block core: {msg}")));
    if core.len() != k || core.iter().any(|r| r.len() != k) {
        return bad(format!("must be {k}x{k}"));
    }
    let tol = MEMBERSHIP_TOL;
    for s in 0..k {
        for t in 0..k {
            let b = core[s][t];
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("entry ({},{}) = {b} outside [0,1]", s + 1, t + 1));
            }
            let mirrored = match kind {
                Kind::Tournament => 1.0 - core[t][s],
                Kind::Graph => core[t][s],
            };
            if s != t && (b - mirrored).abs() > tol {
                return bad(format!(
                    "entries ({},{}) and ({},{}) break the {kind} symmetry",
                    s + 1,
                    t + 1,
                    t + 1,
                    s + 1
                ));
            }
            if kind == Kind::Tournament && s == t && (b - 0.5).abs() > tol {
                return bad("tournament diagonal blocks must be 1/2".into());
            }
            if kind == Kind::Tournament && s < t && b > 0.5 + tol {
                return bad(format!("entry ({},{}) above 1/2", s + 1, t + 1));
            }
            let row_ok = t + 1 == k
                || match kind {
                    Kind::Tournament => core[s][t + 1] <= b + tol,
                    Kind::Graph => core[s][t + 1] >= b - tol,
                };
            let col_ok = s + 1 == k || core[s + 1][t] >= b - tol;
            if !row_ok || !col_ok {
                return bad(format!("not monotone at ({},{})", s + 1, t + 1));
            }
        }
    }
    Ok(())
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds `θ*` (sorted) and `π*` for a spec.
pub fn generate(spec: &ModelSpec) -> Result<(ProbabilityMatrix, Permutation)> {
    let theta = generate_sorted(spec)?;
    let pi = match spec.params.latent {
        LatentPermutation::Identity => Permutation::identity(spec.n),
        LatentPermutation::Uniform => Permutation::random(spec.n, &mut stream_rng(spec.seed, 1)),
    };
    Ok((theta, pi))
}

/// Builds the sorted representative only.
pub fn generate_sorted(spec: &ModelSpec) -> Result<ProbabilityMatrix> {
    spec.validate()?;
    let p = &spec.params;
    let n = spec.n;
    let kind = p.kind();
    let mut rng = stream_rng(spec.seed, 0);
    let theta = match p.family {
        Family::WorstCase => ProbabilityMatrix::from_upper(kind, n, |_, _| 0.25)?,
        Family::ConstantHalf => ProbabilityMatrix::half(kind, n),
        Family::Block => {
            let k = p.k.expect("validated");
            let core = match &p.core {
                Some(c) => c.clone(),
                None => random_core(k, kind, &mut rng),
            };
            let size = n / k;
            ProbabilityMatrix::from_upper(kind, n, |i, j| core[i / size][j / size])?
        }
        Family::GeneralizedBradleyTerry | Family::GeneralizedBeta => {
            let w = sorted_weights(p, n, &mut rng);
            let link = p.link();
            if p.family == Family::GeneralizedBradleyTerry {
                ProbabilityMatrix::from_upper(kind, n, |i, j| link.cdf(w[i] - w[j]).min(0.5))?
            } else {
                ProbabilityMatrix::from_upper(kind, n, |i, j| link.cdf(w[i] + w[j]))?
            }
        }
        Family::Holder | Family::LowerHolder => holder_ramp(spec)?,
        Family::RandomMonotone => random_monotone(kind, n, &mut rng)?,
    };
    debug_assert!(
        theta.is_member_sorted(),
        "{} produced an unsorted matrix",
        p.family
    );
    Ok(theta)
}

fn sorted_weights(p: &ModelParams, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = p.m();
    let mut w = match &p.weights {
        Some(w) => w.clone(),
        None if m == 0.0 => vec![0.0; n],
        None => (0..n).map(|_| rng.gen_range(-m..=m)).collect(),
    };
    // the strongest player gets the largest index
    w.sort_by(f64::total_cmp);
    w
}

/// Random monotone `k x k` core: cumulative maxima of uniform draws.
fn random_core(k: usize, kind: Kind, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut core = vec![vec![0.0; k]; k];
    match kind {
        Kind::Tournament => {
            let small = random_cummax(k, 0.5, kind, rng);
            for s in 0..k {
                core[s][s] = 0.5;
                for t in s + 1..k {
                    core[s][t] = small.get(s, t);
                    core[t][s] = 1.0 - small.get(s, t);
                }
            }
        }
        Kind::Graph => {
            // diagonal blocks are free in the graph case
            for s in 0..k {
                for t in s..k {
                    let mut v: f64 = rng.gen();
                    if t > s {
                        v = v.max(core[s][t - 1]);
                    }
                    if s > 0 {
                        v = v.max(core[s - 1][t]);
                    }
                    core[s][t] = v;
                    core[t][s] = v;
                }
            }
        }
    }
    core
}

/// Upper triangle of cumulative maxima of uniform draws on `[0, hi]`,
/// taken along the increasing direction of each chain.
fn random_cummax(n: usize, hi: f64, kind: Kind, rng: &mut ChaCha8Rng) -> Matrix {
    let mut x = Matrix::zeros(n);
    for i in 0..n {
        let cols: Box<dyn Iterator<Item = usize>> = match kind {
            Kind::Tournament => Box::new((i + 1..n).rev()),
            Kind::Graph => Box::new(i + 1..n),
        };
        for j in cols {
            let mut v = rng.gen_range(0.0..=hi);
            let row_prev = match kind {
                Kind::Tournament => (j + 1 < n).then(|| x.get(i, j + 1)),
                Kind::Graph => (j > i + 1).then(|| x.get(i, j - 1)),
            };
            if let Some(r) = row_prev {
                v = v.max(r);
            }
            if i > 0 {
                v = v.max(x.get(i - 1, j));
            }
            x.set(i, j, v);
        }
    }
    x
}

fn random_monotone(kind: Kind, n: usize, rng: &mut ChaCha8Rng) -> Result<ProbabilityMatrix> {
    let x = random_cummax(n, kind.upper_bound(), kind, rng);
    ProbabilityMatrix::from_upper(kind, n, |i, j| x.get(i, j))
}

/// Extremes over `d = 1..n-1` of `d^{1-α} n^{α-1}`, the Hölder ratio of a
/// unit-slope linear ramp `(j - k) / n` at column distance `d`.
fn ramp_ratio_range(n: usize, alpha: f64) -> (f64, f64) {
    let nf = n as f64;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for d in 1..n.max(2) {
        let r = (d as f64).powf(1.0 - alpha) * nf.powf(alpha - 1.0);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (hi, lo)
}

/// Linear ramps with slope chosen from the exact Hölder ratio range:
/// tournament `θ_ij = 1/2 - b (j - i) / n`, graph
/// `θ_ij = 1/2 + b (i + j - (n - 1)) / n`. Both move by exactly
/// `b |j - k| / n` between columns `j` and `k` of any row.
fn holder_ramp(spec: &ModelSpec) -> Result<ProbabilityMatrix> {
    let p = &spec.params;
    let n = spec.n;
    let kind = p.kind();
    let nf = n as f64;
    let (ratio_max, ratio_min) = ramp_ratio_range(n, p.alpha());
    // largest |offset| from 1/2 of the unit ramp
    let reach = match kind {
        Kind::Tournament => (nf - 1.0) / nf,
        Kind::Graph => (nf - 2.0).max(0.0) / nf,
    };
    let box_slope = if reach > 0.0 {
        0.5 / reach
    } else {
        f64::INFINITY
    };
    let b = (p.l() / ratio_max).min(box_slope);
    if p.family == Family::LowerHolder && n >= 3 && b * ratio_min < p.l_lower() * (1.0 - 1e-12) {
        return Err(Error::InfeasibleSpec(format!(
            "no linear ramp in [0,1] with alpha={} has lower constant {} at n={n} (best {})",
            p.alpha(),
            p.l_lower(),
            b * ratio_min
        )));
    }
    let theta = match kind {
        Kind::Tournament => ProbabilityMatrix::from_upper(kind, n, |i, j| {
            (0.5 - b * (j - i) as f64 / nf).clamp(0.0, 0.5)
        })?,
        Kind::Graph => ProbabilityMatrix::from_upper(kind, n, |i, j| {
            (0.5 + b * ((i + j) as f64 - (nf - 1.0)) / nf).clamp(0.0, 1.0)
        })?,
    };
    Ok(theta)
}

/// Largest and smallest `|θ_ij − θ_ik| n^α / |j − k|^α` over rows `i` and
/// distinct columns `j, k` both different from `i`.
pub fn holder_ratio_range(theta: &ProbabilityMatrix, alpha: f64) -> (f64, f64) {
    let n = theta.n();
    let nf = n as f64;
    let scale: Vec<f64> = (0..n).map(|d| (nf / d as f64).powf(alpha)).collect();
    let mut hi: f64 = 0.0;
    let mut lo = f64::INFINITY;
    for i in 0..n {
        let row = theta.matrix().row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in j + 1..n {
                if k == i {
                    continue;
                }
                let r = (row[j] - row[k]).abs() * scale[k - j];
                hi = hi.max(r);
                lo = lo.min(r);
            }
        }
    }
    (hi, lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family, n: usize) -> ModelSpec {
        ModelSpec::new(family, n, 5)
    }

    #[test]
    fn worst_case_n4() {
        let (theta, _) = generate(&spec(Family::WorstCase, 4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = match i.cmp(&j) {
                    std::cmp::Ordering::Less => 0.25,
                    std::cmp::Ordering::Equal => 0.0,
                    std::cmp::Ordering::Greater => 0.75,
                };
                assert_eq!(theta.get(i, j), want);
            }
        }
        assert!(theta.is_member_sorted());
    }

    #[test]
    fn equal_weights_give_constant_half() {
        let mut s = spec(Family::GeneralizedBradleyTerry, 7);
        s.params.weights = Some(vec![0.3; 7]);
        let theta = generate_sorted(&s).unwrap();
        assert_eq!(theta, ProbabilityMatrix::half(Kind::Tournament, 7));
    }

    #[test]
    fn block_example() {
        let mut s = spec(Family::Block, 4);
        s.params.k = Some(2);
        s.params.core = Some(vec![vec![0.5, 0.3], vec![0.7, 0.5]]);
        let theta = generate_sorted(&s).unwrap();
        let want = [
            [0.0, 0.5, 0.3, 0.3],
            [0.5, 0.0, 0.3, 0.3],
            [0.7, 0.7, 0.0, 0.5],
            [0.7, 0.7, 0.5, 0.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((theta.get(i, j) - want[i][j]).abs() < 1e-15);
            }
        }
        assert!(theta.is_member_sorted());
    }

    #[test]
    fn block_validation() {
        let mut s = spec(Family::Block, 6);
        assert!(generate(&s).is_err());
        s.params.k = Some(4);
        assert!(generate(&s).is_err());
        s.params.k = Some(2);
        s.params.core = Some(vec![vec![0.5, 0.7], vec![0.3, 0.5]]);
        assert!(generate(&s).is_err());
        s.params.core = Some(vec![vec![0.5, 0.3], vec![0.6, 0.5]]);
        assert!(generate(&s).is_err());
    }

    #[test]
    fn block_rows_have_at_most_k_values() {
        for kind in [Kind::Tournament, Kind::Graph] {
            for k in [1, 2, 3, 6] {
                let mut s = spec(Family::Block, 12).with_kind(kind);
                s.params.k = Some(k);
                let theta = generate_sorted(&s).unwrap();
                assert!(theta.is_member_sorted());
                for i in 0..12 {
                    let mut vals: Vec<f64> = (0..12)
                        .filter(|&j| j != i)
                        .map(|j| theta.get(i, j))
                        .collect();
                    vals.sort_by(f64::total_cmp);
                    vals.dedup();
                    assert!(vals.len() <= k, "k={k} row {i}: {vals:?}");
                }
            }
        }
    }

    #[test]
    fn link_values() {
        assert_eq!(builtin_link("logistic", 0.0).unwrap(), 0.5);
        assert!((builtin_link("logistic", 3f64.ln()).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(builtin_link("probit", 0.0).unwrap(), 0.5);
        assert!(builtin_link("cauchy", 0.0).is_err());
        // Φ(1) and Φ(-2) from standard tables
        assert!((Link::Probit.cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((Link::Probit.cdf(-2.0) - 0.022_750_131_948_179_2).abs() < 1e-12);
        assert_eq!(Link::Probit.cdf(-60.0), LINK_CLAMP);
        for link in [Link::Logistic, Link::Probit] {
            for x in [-5.0, -1.3, 0.2, 2.0, 9.0] {
                assert!((link.cdf(x) + link.cdf(-x) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn link_density_matches_difference_quotient() {
        for link in [Link::Logistic, Link::Probit] {
            for x in [-2.0, -0.5, 0.0, 0.7, 1.9] {
                let h = 1e-5;
                let fd = (link.cdf(x + h) - link.cdf(x - h)) / (2.0 * h);
                assert!((fd - link.density(x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gbt_and_beta_are_sorted_members() {
        for link in [Link::Logistic, Link::Probit] {
            for m in [0.5, 1.0, 3.0] {
                let mut s = spec(Family::GeneralizedBradleyTerry, 40);
                s.params.link = Some(link);
                s.params.m = Some(m);
                let (theta, pi) = generate(&s).unwrap();
                assert!(theta.is_member_sorted());
                let observed = theta.permuted(&pi).unwrap();
                assert!(observed.is_member_parameter_space());
                for i in 0..40 {
                    for j in 0..40 {
                        if i != j {
                            assert!((theta.get(i, j) + theta.get(j, i) - 1.0).abs() < 1e-15);
                        }
                    }
                }
                s.params.family = Family::GeneralizedBeta;
                let theta = generate_sorted(&s).unwrap();
                assert_eq!(theta.kind(), Kind::Graph);
                assert!(theta.is_member_sorted());
            }
        }
    }

    #[test]
    fn weights_outside_range_are_rejected() {
        let mut s = spec(Family::GeneralizedBradleyTerry, 3);
        s.params.weights = Some(vec![0.0, 2.0, 0.0]);
        assert!(generate(&s).is_err());
        s.params.weights = Some(vec![0.0, 1.0]);
        assert!(generate(&s).is_err());
    }

    #[test]
    fn holder_constants_hold() {
        for kind in [Kind::Tournament, Kind::Graph] {
            for alpha in [0.5, 1.0, 2.0] {
                for l in [0.3, 1.0, 4.0] {
                    let mut s = spec(Family::Holder, 30).with_kind(kind);
                    s.params.alpha = Some(alpha);
                    s.params.l = Some(l);
                    let theta = generate_sorted(&s).unwrap();
                    assert!(theta.is_member_sorted());
                    let (hi, _) = holder_ratio_range(&theta, alpha);
                    assert!(hi <= l + 1e-9, "{kind} alpha={alpha} L={l}: {hi}");
                }
            }
        }
    }

    #[test]
    fn lower_holder_constants_hold() {
        for kind in [Kind::Tournament, Kind::Graph] {
            let mut s = spec(Family::LowerHolder, 25).with_kind(kind);
            s.params.alpha = Some(1.0);
            s.params.l = Some(1.0);
            s.params.l_lower = Some(0.5);
            let theta = generate_sorted(&s).unwrap();
            let (hi, lo) = holder_ratio_range(&theta, 1.0);
            assert!(hi <= 1.0 + 1e-9);
            assert!(lo >= 0.5 - 1e-9, "{kind}: {lo}");
        }
    }

    #[test]
    fn infeasible_lower_holder_is_reported() {
        let mut s = spec(Family::LowerHolder, 50);
        s.params.alpha = Some(0.5);
        s.params.l = Some(1.0);
        s.params.l_lower = Some(0.9);
        assert!(matches!(generate(&s), Err(Error::InfeasibleSpec(_))));
        s.params.alpha = Some(1.0);
        s.params.l_lower = Some(2.0);
        assert!(matches!(generate(&s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn random_monotone_is_sorted() {
        for kind in [Kind::Tournament, Kind::Graph] {
            for seed in 0..5 {
                let theta = generate_sorted(
                    &ModelSpec::new(Family::RandomMonotone, 15, seed).with_kind(kind),
                )
                .unwrap();
                assert!(theta.is_member_sorted());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for family in Family::ALL {
            let mut s = spec(family, 12);
            s.params.k = Some(3);
            let a = generate(&s).unwrap();
            let b = generate(&s).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn latent_policy_does_not_change_theta() {
        let s = spec(Family::GeneralizedBradleyTerry, 20);
        let (a, pi) = generate(&s).unwrap();
        let (b, id) = generate(&s.clone().with_latent(LatentPermutation::Identity)).unwrap();
        assert_eq!(a, b);
        assert!(id.is_identity());
        assert!(!pi.is_identity());
    }

    #[test]
    fn family_names_parse() {
        for family in Family::ALL {
            assert_eq!(family.as_str().parse::<Family>().unwrap(), family);
        }
        assert_eq!(
            "Lower_Holder".parse::<Family>().unwrap(),
            Family::LowerHolder
        );
        assert_eq!("WorstCase".parse::<Family>().unwrap(), Family::WorstCase);
        assert!("nope".parse::<Family>().is_err());
    }
}
