//! Sort-by-row-sums, debias, project, unsort.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::isotonic::{
    assemble_estimate, project_triangle, ProjectionDiagnostics, ProjectionOptions,
    UpperTriangleField,
};
use crate::matrix::{Permutation, ProbabilityMatrix};
use crate::observation::{debias, filled_row_sums, ranking_permutation_with, ObservationMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PMode {
    /// Divide by the observed fraction and fall back to `J/2` when it is
    /// below `1/n`.
    UseEstimatedP,
    /// Divide by a known sampling probability; never falls back.
    UseKnownP(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct EstimatorConfig {
    pub p_mode: PMode,
    pub projection: ProjectionOptions,
    pub tie_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            p_mode: PMode::UseEstimatedP,
            projection: ProjectionOptions::default(),
            tie_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_tie_seed(mut self, seed: u64) -> Self {
        self.tie_seed = seed;
        self
    }

    pub fn known_p(mut self, p: f64) -> Self {
        self.p_mode = PMode::UseKnownP(p);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Estimate {
    pub theta: ProbabilityMatrix,
    /// Sorting permutation; `None` when the `J/2` fallback was taken.
    pub sigma: Option<Permutation>,
    pub fallback: bool,
    pub p_used: f64,
    pub diagnostics: ProjectionDiagnostics,
}

pub fn estimate(obs: &ObservationMatrix, cfg: &EstimatorConfig) -> Result<Estimate> {
    let n = obs.n();
    let kind = obs.kind();
    let p_used = match cfg.p_mode {
        PMode::UseKnownP(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!(
                    "known p must lie in (0, 1], got {p}"
                )));
            }
            p
        }
        PMode::UseEstimatedP => {
            if n >= 2 && obs.too_sparse() {
                return Ok(Estimate {
                    theta: ProbabilityMatrix::half(kind, n),
                    sigma: None,
                    fallback: true,
                    p_used: obs.p_hat(),
                    diagnostics: ProjectionDiagnostics::default(),
                });
            }
            obs.p_hat()
        }
    };
    if n < 2 {
        return Ok(Estimate {
            theta: ProbabilityMatrix::half(kind, n),
            sigma: Some(Permutation::identity(n)),
            fallback: false,
            p_used,
            diagnostics: ProjectionDiagnostics::default(),
        });
    }
    let row_sums = filled_row_sums(obs);
    let sigma = ranking_permutation_with(&row_sums, &mut ChaCha8Rng::seed_from_u64(cfg.tie_seed));
    let sorted = debias(obs, p_used)?.permuted(&sigma)?;
    let field = UpperTriangleField::from_matrix(&sorted);
    let (projected, diagnostics) = project_triangle(&field, kind, cfg.projection)
        .map_err(|e| e.context(format!("projecting the sorted {kind} estimate (n={n})")))?;
    let theta = assemble_estimate(&projected, kind)?.permuted(&sigma.inverse())?;
    Ok(Estimate {
        theta,
        sigma: Some(sigma),
        fallback: false,
        p_used,
        diagnostics,
    })
}

/// The same pipeline with `p` in place of the observed fraction.
pub fn estimate_known_p(
    obs: &ObservationMatrix,
    p: f64,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    estimate(obs, &cfg.known_p(p))
}
