//! Slow reference projection for small triangles.
//!
//! Solves `min ½‖x − v‖²` subject to every adjacent chain inequality and
//! both box bounds, with the box handled as ordinary constraints rather
//! than by clipping. Hildreth's method: cyclic exact maximisation of the
//! dual over one multiplier at a time. The result is accepted only if it
//! passes a KKT check (primal feasibility, nonnegative multipliers,
//! stationarity, complementary slackness).

use crate::error::{Error, Result};
use crate::isotonic::UpperTriangleField;
use crate::matrix::Kind;

/// Largest `n` the oracle accepts.
pub const ORACLE_MAX_N: usize = 8;

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub max_sweeps: usize,
    /// Stop once a sweep changes no multiplier by more than this.
    pub tol: f64,
    /// Allowed KKT residual.
    pub certify_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_sweeps: 1_000_000,
            tol: 1e-15,
            certify_tol: 1e-9,
        }
    }
}

/// One constraint `x[a] − x[b] ≤ 0`, `x[a] ≤ hi` or `−x[a] ≤ 0`.
#[derive(Clone, Copy, Debug)]
enum Constraint {
    Order { below: usize, above: usize },
    Upper { cell: usize, bound: f64 },
    Lower { cell: usize },
}

impl Constraint {
    /// `a·x − b`; positive means violated.
    fn slack(self, x: &[f64]) -> f64 {
        match self {
            Constraint::Order { below, above } => x[below] - x[above],
            Constraint::Upper { cell, bound } => x[cell] - bound,
            Constraint::Lower { cell } => -x[cell],
        }
    }

    fn norm_sq(self) -> f64 {
        match self {
            Constraint::Order { .. } => 2.0,
            _ => 1.0,
        }
    }

    /// `x −= step · a`.
    fn shift(self, x: &mut [f64], step: f64) {
        match self {
            Constraint::Order { below, above } => {
                x[below] -= step;
                x[above] += step;
            }
            Constraint::Upper { cell, .. } => x[cell] -= step,
            Constraint::Lower { cell } => x[cell] += step,
        }
    }
}

fn constraints(n: usize, kind: Kind) -> Vec<Constraint> {
    let offset = |i: usize, j: usize| i * (2 * n - i - 1) / 2 + (j - i - 1);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let here = offset(i, j);
            if j + 1 < n {
                let right = offset(i, j + 1);
                out.push(match kind {
                    Kind::Tournament => Constraint::Order {
                        below: right,
                        above: here,
                    },
                    Kind::Graph => Constraint::Order {
                        below: here,
                        above: right,
                    },
                });
            }
            if i + 1 < j {
                out.push(Constraint::Order {
                    below: here,
                    above: offset(i + 1, j),
                });
            }
            out.push(Constraint::Upper {
                cell: here,
                bound: kind.upper_bound(),
            });
            out.push(Constraint::Lower { cell: here });
        }
    }
    out
}

/// Projection of `field` onto the sorted space of `kind` (cone and box
/// together), certified by its KKT conditions.
pub fn oracle_project(
    field: &UpperTriangleField,
    kind: Kind,
    opts: OracleOptions,
) -> Result<UpperTriangleField> {
    let n = field.n();
    if n > ORACLE_MAX_N {
        return Err(Error::invalid(format!(
            "oracle is limited to n <= {ORACLE_MAX_N}, got {n}"
        )));
    }
    let v = field.values();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("oracle input must be finite"));
    }
    let cons = constraints(n, kind);
    let mut lambda = vec![0.0; cons.len()];
    let mut x = v.to_vec();
    for _ in 0..opts.max_sweeps {
        let mut biggest: f64 = 0.0;
        for (c, l) in cons.iter().zip(lambda.iter_mut()) {
            let next = (*l + c.slack(&x) / c.norm_sq()).max(0.0);
            let step = next - *l;
            if step != 0.0 {
                c.shift(&mut x, step);
                *l = next;
                biggest = biggest.max(step.abs());
            }
        }
        if biggest <= opts.tol {
            break;
        }
    }
    certify(v, &x, &cons, &lambda, opts.certify_tol)?;
    UpperTriangleField::new(n, x)
}

fn certify(v: &[f64], x: &[f64], cons: &[Constraint], lambda: &[f64], tol: f64) -> Result<()> {
    // stationarity: x = v − Σ λ_c a_c, rebuilt from scratch
    let mut rebuilt = v.to_vec();
    for (c, &l) in cons.iter().zip(lambda) {
        c.shift(&mut rebuilt, l);
    }
    let stationarity = rebuilt
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut feasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for (c, &l) in cons.iter().zip(lambda) {
        let s = c.slack(x);
        feasibility = feasibility.max(s);
        complementarity = complementarity.max((l * s).abs());
        if l < 0.0 {
            return Err(Error::OracleFailure(format!("negative multiplier {l}")));
        }
    }
    for (name, value) in [
        ("stationarity", stationarity),
        ("primal feasibility", feasibility),
        ("complementary slackness", complementarity),
    ] {
        if !(value <= tol) {
            return Err(Error::OracleFailure(format!(
                "{name} residual {value:e} exceeds {tol:e}"
            )));
        }
    }
    Ok(())
}
