//! The adaptivity functional `Q(p, θ)`, rate formulas and log-log fits.
//!
//! Logs are natural except in [`fit_loglog_slope`], which works in base 10.
//! All rate formulas have their universal constant set to 1.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Permutation, ProbabilityMatrix};
use crate::models::{Family, ModelParams};

/// Row-sum window `4 sqrt(n p ln n)` of the Q functional.
pub fn q_window(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    4.0 * (nf * p * nf.ln()).sqrt()
}

/// `Σ_i max_{j : |R_j − R_i| ≤ radius} Σ_k (p θ_ik − p θ_jk)²` with
/// `R = p · rowsums(θ)`. `j = i` is always eligible.
pub fn q_functional_with_radius(theta: &ProbabilityMatrix, p: f64, radius: f64) -> f64 {
    let n = theta.n();
    let m = theta.matrix();
    let rows: Vec<f64> = theta.row_sums().into_iter().map(|r| p * r).collect();
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = m.row(i);
            (0..n)
                .filter(|&j| (rows[j] - rows[i]).abs() <= radius)
                .map(|j| {
                    m.row(j)
                        .iter()
                        .zip(ri)
                        .map(|(a, b)| {
                            let d = p * b - p * a;
                            d * d
                        })
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    // sequential sum keeps the value independent of the thread count
    per_row.iter().sum()
}

pub fn q_functional(theta: &ProbabilityMatrix, p: f64) -> f64 {
    q_functional_with_radius(theta, p, q_window(theta.n(), p))
}

/// `4 (np)^{3/2} sqrt(ln n)`, a bound on `Q` valid for every matrix.
pub fn q_worst_case_bound(n: usize, p: f64) -> f64 {
    let np = n as f64 * p;
    4.0 * np.powf(1.5) * (n as f64).ln().sqrt()
}

/// Per-pair outcome of [`q_term_bound_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct QTermReport {
    pub pass: bool,
    /// Largest `term / bound` over eligible pairs.
    pub worst_ratio: f64,
    /// 0-based pair attaining `worst_ratio`.
    pub worst_pair: (usize, usize),
    pub pairs_checked: usize,
    pub bound: f64,
}

/// Density extremes `(sup f, inf f)` of the model's link on `[−2M, 2M]`.
pub fn link_constants(params: &ModelParams) -> (f64, f64) {
    params.link().density_range(2.0 * params.m())
}

/// Checks, for every pair `(i, j)` inside the Q window, the family's
/// per-pair bound on `Σ_k (p θ_ik − p θ_jk)²`:
///
/// * block: `16 p min(k, sqrt(np)) ln n`
/// * generalized Bradley-Terry / beta: `16 p (L/L')² ln n` with `L, L'`
///   the extreme link densities on `[−2M, 2M]`
/// * lower Hölder: `16 p (L/L')² ln n` with the Hölder constants
/// * Hölder: `max_{k ∉ {i,j}} |θ_ik − θ_jk| ≤ (4 sqrt(ln n/(np)))^{α/(α+1)} (4L)^{1/(α+1)}`
/// * anything else: `4 p sqrt(np ln n)`
pub fn q_term_bound_check(
    theta: &ProbabilityMatrix,
    p: f64,
    params: &ModelParams,
) -> Result<QTermReport> {
    let n = theta.n();
    if theta.kind() != params.kind() {
        return Err(Error::invalid(format!(
            "{} matrix checked against a {} model",
            theta.kind(),
            params.kind()
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1], got {p}")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let np = nf * p;
    let max_entry = params.family == Family::Holder;
    let bound = match params.family {
        Family::Block => {
            let k = params
                .k
                .ok_or_else(|| Error::invalid("block check needs k"))?;
            if k == 0 || !n.is_multiple_of(k) {
                return Err(Error::invalid(format!("k={k} does not divide n={n}")));
            }
            16.0 * p * (k as f64).min(np.sqrt()) * ln
        }
        Family::GeneralizedBradleyTerry | Family::GeneralizedBeta => {
            let (l, l_low) = link_constants(params);
            16.0 * p * (l / l_low).powi(2) * ln
        }
        Family::LowerHolder => 16.0 * p * (params.l() / params.l_lower()).powi(2) * ln,
        Family::Holder => {
            let a = params.alpha();
            (4.0 * (ln / np).sqrt()).powf(a / (a + 1.0)) * (4.0 * params.l()).powf(1.0 / (a + 1.0))
        }
        _ => 4.0 * p * (np * ln).sqrt(),
    };
    let m = theta.matrix();
    let rows: Vec<f64> = theta.row_sums().into_iter().map(|r| p * r).collect();
    let radius = q_window(n, p);
    let mut report = QTermReport {
        pass: true,
        worst_ratio: 0.0,
        worst_pair: (0, 0),
        pairs_checked: 0,
        bound,
    };
    for i in 0..n {
        for j in 0..n {
            if j == i || (rows[j] - rows[i]).abs() > radius {
                continue;
            }
            let term = if max_entry {
                (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| (m.get(i, k) - m.get(j, k)).abs())
                    .fold(0.0, f64::max)
            } else {
                (0..n)
                    .map(|k| {
                        let d = p * m.get(i, k) - p * m.get(j, k);
                        d * d
                    })
                    .sum()
            };
            report.pairs_checked += 1;
            let ratio = if bound > 0.0 {
                term / bound
            } else if term > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_pair = (i, j);
            }
        }
    }
    report.pass = report.worst_ratio <= 1.0 + 1e-12;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RateBound {
    Main,
    WorstCase,
    Block,
    Gbt,
    Holder,
    LowerHolder,
}

impl RateBound {
    pub const ALL: [RateBound; 6] = [
        RateBound::Main,
        RateBound::WorstCase,
        RateBound::Block,
        RateBound::Gbt,
        RateBound::Holder,
        RateBound::LowerHolder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RateBound::Main => "main",
            RateBound::WorstCase => "worst-case",
            RateBound::Block => "block",
            RateBound::Gbt => "gbt",
            RateBound::Holder => "holder",
            RateBound::LowerHolder => "lower-holder",
        }
    }
}

impl fmt::Display for RateBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateBound {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match key.as_str() {
            "main" => RateBound::Main,
            "worstcase" => RateBound::WorstCase,
            "block" => RateBound::Block,
            "gbt" | "beta" => RateBound::Gbt,
            "holder" => RateBound::Holder,
            "lowerholder" => RateBound::LowerHolder,
            _ => return Err(Error::invalid(format!("unknown rate bound `{s}`"))),
        })
    }
}

impl TryFrom<String> for RateBound {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RateBound> for String {
    fn from(b: RateBound) -> String {
        b.as_str().to_string()
    }
}

/// Inputs a rate formula may need beyond `n` and `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundParams {
    /// `Q(p, θ*)`, needed by [`RateBound::Main`].
    pub q: Option<f64>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    /// Upper constant: Hölder `L`, or the largest link density.
    pub l: Option<f64>,
    /// Lower constant: lower-Hölder `L'`, or the smallest link density.
    pub l_lower: Option<f64>,
}

impl BoundParams {
    /// Constants implied by a model: link densities on `[−2M, 2M]` for the
    /// link families, Hölder constants otherwise.
    pub fn from_model(params: &ModelParams) -> Self {
        let (l, l_lower) = match params.family {
            Family::GeneralizedBradleyTerry | Family::GeneralizedBeta => link_constants(params),
            _ => (params.l(), params.l_lower()),
        };
        BoundParams {
            q: None,
            k: params.k,
            alpha: Some(params.alpha()),
            l: Some(l),
            l_lower: Some(l_lower),
        }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// `p ≥ 2 ln n / n`, the standing assumption of the rate results.
    pub in_regime: bool,
}

pub fn in_regime(n: usize, p: f64) -> bool {
    p >= 2.0 * (n as f64).ln() / n as f64
}

pub fn evaluate_bound(
    bound: RateBound,
    n: usize,
    p: f64,
    params: &BoundParams,
) -> Result<BoundValue> {
    if n < 2 {
        return Err(Error::invalid("rate bounds need n >= 2"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1], got {p}")));
    }
    let need = |v: Option<f64>, what: &str| {
        v.ok_or_else(|| Error::invalid(format!("{bound} bound needs {what}")))
    };
    let nf = n as f64;
    let ln = nf.ln();
    let np = nf * p;
    let base = ln * ln / np;
    let value = match bound {
        RateBound::Main => base + need(params.q, "Q")? / (np * np),
        RateBound::WorstCase => base + (ln / np).sqrt(),
        RateBound::Block => {
            let k = params
                .k
                .ok_or_else(|| Error::invalid("block bound needs k"))? as f64;
            k.min(np.sqrt()) * ln / np + base
        }
        RateBound::Gbt | RateBound::LowerHolder => {
            let ratio = need(params.l, "L")? / need(params.l_lower, "L'")?;
            ratio * ratio * ln / np + base
        }
        RateBound::Holder => {
            let a = need(params.alpha, "alpha")?;
            let l = need(params.l, "L")?;
            l.powf(1.0 / (a + 1.0)) * ln / np.powf((2.0 * a + 1.0) / (2.0 * a + 2.0)) + base
        }
    };
    Ok(BoundValue {
        value,
        in_regime: in_regime(n, p),
    })
}

/// `n,p,family,bound_value` rows.
pub fn bound_csv(rows: &[(usize, f64, String, f64)]) -> String {
    let mut out = String::from("n,p,family,bound_value\n");
    for (n, p, family, v) in rows {
        writeln!(out, "{n},{p},{family},{v:.10e}").unwrap();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LogLogFit {
    /// Fitted `log10 mse` at `log10 n = x`.
    pub fn predict_log(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Least squares line through `(log10 n, log10 mse)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    fit_loglog_unchecked(points)
}

/// As [`fit_loglog_slope`] but accepts two points.
pub(crate) fn fit_loglog_unchecked(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::invalid(format!(
            "log-log fit needs positive values, got ({x}, {y})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| x.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.log10()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("log-log fit needs at least two distinct n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
    })
}

/// `max_i |R_i − R_{σ(i)}|` with `R = p · rowsums(θ)`, for a sorted `θ`
/// and an estimated sorting permutation `σ`.
pub fn rank_displacement(theta: &ProbabilityMatrix, sigma: &Permutation, p: f64) -> f64 {
    let r = theta.row_sums();
    (0..theta.n())
        .map(|i| (p * r[i] - p * r[sigma.apply(i)]).abs())
        .fold(0.0, f64::max)
}

/// `t_n = 2 sqrt(n p ln n)`.
pub fn rank_threshold(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    2.0 * (nf * p * nf.ln()).sqrt()
}
