//! Euclidean projection onto the sorted tournament and graph spaces.
//!
//! Only the cells strictly above the diagonal carry information: the lower
//! triangle is a fixed affine image of the upper one and the diagonal is
//! zero, so the projection of a full matrix with the right symmetry is the
//! projection of its upper triangle. On the triangle the constraint set is
//! a cone cut out by two families of chains, rows (fixed `i`, `j` growing)
//! and columns (fixed `j`, `i` growing), intersected with a box. The box is
//! applied after the cone projection by clipping.
//!
//! Two cone solvers are provided. [`ProjectionMethod::Partition`] is exact:
//! it splits the cells recursively at the mean of the current block, where
//! the split is the best "upper set" of the block, found by a staircase
//! dynamic program. [`ProjectionMethod::Dykstra`] alternates exact 1-D PAVA
//! projections onto the row family and the column family; it is simple but
//! needs thousands of sweeps once `n` reaches a few hundred.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Kind, Matrix, ProbabilityMatrix, MEMBERSHIP_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
}

/// Weighted least-squares projection of `values` onto monotone sequences.
pub fn pava_1d(values: &[f64], weights: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("pava_1d needs at least one value"));
    }
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("weights must be positive, got {w}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("pava_1d values must be finite"));
    }

    // (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let (mut mean, mut weight, mut len) = (v, w, 1usize);
        while let Some(&(m, bw, bl)) = blocks.last() {
            let violates = match direction {
                Direction::NonDecreasing => m > mean,
                Direction::NonIncreasing => m < mean,
            };
            if !violates {
                break;
            }
            blocks.pop();
            mean = (m * bw + mean * weight) / (bw + weight);
            weight += bw;
            len += bl;
        }
        blocks.push((mean, weight, len));
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, len) in blocks {
        out.extend(std::iter::repeat_n(mean, len));
    }
    Ok(out)
}

/// Unit-weight PAVA in place. `blocks` is scratch space.
fn pava_unit_inplace(y: &mut [f64], direction: Direction, blocks: &mut Vec<(f64, usize)>) {
    blocks.clear();
    for &v in y.iter() {
        let (mut sum, mut cnt) = (v, 1usize);
        while let Some(&(s, c)) = blocks.last() {
            // compare means s/c and sum/cnt without dividing
            let lhs = s * cnt as f64;
            let rhs = sum * c as f64;
            let violates = match direction {
                Direction::NonDecreasing => lhs > rhs,
                Direction::NonIncreasing => lhs < rhs,
            };
            if !violates {
                break;
            }
            blocks.pop();
            sum += s;
            cnt += c;
        }
        blocks.push((sum, cnt));
    }
    let mut pos = 0;
    for &(sum, cnt) in blocks.iter() {
        let mean = sum / cnt as f64;
        y[pos..pos + cnt].fill(mean);
        pos += cnt;
    }
}

/// Values indexed by the cells `(i, j)`, `i < j`, of an `n × n` matrix.
///
/// Layout is row-major over `i`, then `j > i`: cell `(i, j)` lives at
/// `i·(2n − i − 1)/2 + (j − i − 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangleField {
    n: usize,
    values: Vec<f64>,
}

impl UpperTriangleField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "triangle of n={n} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(UpperTriangleField { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(f(i, j));
            }
        }
        UpperTriangleField { n, values }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let n = m.n();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            values.extend_from_slice(&m.row(i)[i + 1..]);
        }
        UpperTriangleField { n, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.offset(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sup-norm distance.
    pub fn max_abs_diff(&self, other: &UpperTriangleField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance over the triangle cells.
    pub fn distance(&self, other: &UpperTriangleField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest amount by which any adjacent chain pair or box bound is violated.
    pub fn max_violation(&self, kind: Kind) -> f64 {
        let chains = ChainSystem::for_kind(kind);
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.get(i, j);
                worst = worst.max(-v).max(v - kind.upper_bound());
                if j + 1 < n {
                    worst = worst.max(chains.row.violation(v, self.get(i, j + 1)));
                }
                if i + 1 < j {
                    worst = worst.max(chains.column.violation(v, self.get(i + 1, j)));
                }
            }
        }
        worst
    }

    pub fn is_feasible(&self, kind: Kind, tol: f64) -> bool {
        self.max_violation(kind) <= tol
    }
}

impl Direction {
    /// How far the consecutive pair `(a, b)` is from satisfying the order.
    #[inline]
    fn violation(self, a: f64, b: f64) -> f64 {
        match self {
            Direction::NonDecreasing => a - b,
            Direction::NonIncreasing => b - a,
        }
    }
}

/// Monotonicity directions of the row and column chains of the triangle.
///
/// Every cell lies on exactly one row chain (fixed `i`) and one column chain
/// (fixed `j`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainSystem {
    pub row: Direction,
    pub column: Direction,
}

impl ChainSystem {
    pub fn for_kind(kind: Kind) -> Self {
        match kind {
            Kind::Tournament => ChainSystem {
                row: Direction::NonIncreasing,
                column: Direction::NonDecreasing,
            },
            Kind::Graph => ChainSystem {
                row: Direction::NonDecreasing,
                column: Direction::NonDecreasing,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    #[default]
    Partition,
    Dykstra,
}

#[derive(Clone, Copy, Debug)]
pub struct ProjectionOptions {
    pub method: ProjectionMethod,
    /// Dykstra only: stop once a sweep moves no cell by more than this.
    pub tol: f64,
    /// Dykstra only.
    pub max_iters: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            method: ProjectionMethod::Partition,
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

impl ProjectionOptions {
    pub fn dykstra(tol: f64, max_iters: usize) -> Self {
        ProjectionOptions {
            method: ProjectionMethod::Dykstra,
            tol,
            max_iters,
        }
    }
}

/// `iterations` counts Dykstra sweeps, or solved split problems for the
/// partition solver. `final_delta` is the last sweep's sup-norm change for
/// Dykstra and the largest rounding-level order violation repaired for the
/// partition solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ProjectionDiagnostics {
    pub iterations: usize,
    pub final_delta: f64,
    pub clipped_cells: usize,
}

struct Layout {
    n: usize,
    row_start: Vec<usize>,
}

impl Layout {
    fn new(n: usize) -> Self {
        let row_start = (0..n).map(|i| i * (2 * n - i - 1) / 2).collect();
        Layout { n, row_start }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        self.row_start[i] + (j - i - 1)
    }

    fn project_rows(&self, x: &mut [f64], direction: Direction) {
        let mut blocks = Vec::new();
        let mut rest = x;
        for i in 0..self.n {
            let (row, tail) = rest.split_at_mut(self.n - i - 1);
            pava_unit_inplace(row, direction, &mut blocks);
            rest = tail;
        }
    }

    fn project_columns(&self, x: &mut [f64], direction: Direction, buf: &mut Vec<f64>) {
        let mut blocks = Vec::new();
        for j in 1..self.n {
            buf.clear();
            buf.extend((0..j).map(|i| x[self.offset(i, j)]));
            pava_unit_inplace(buf, direction, &mut blocks);
            for (i, &v) in buf.iter().enumerate() {
                x[self.offset(i, j)] = v;
            }
        }
    }

    /// Average of the smallest feasible majorant and the largest feasible
    /// minorant of `x`; both lie in the cone, so their midpoint does too.
    fn polish(&self, x: &mut [f64], chains: ChainSystem) {
        let n = self.n;
        let mut upper = x.to_vec();
        let mut lower = x.to_vec();
        // Visit cells so that every chain predecessor is final before its successor.
        for i in 0..n {
            let cols: Vec<usize> = match chains.row {
                Direction::NonDecreasing => (i + 1..n).collect(),
                Direction::NonIncreasing => (i + 1..n).rev().collect(),
            };
            for j in cols {
                let o = self.offset(i, j);
                let row_prev = match chains.row {
                    Direction::NonDecreasing => (j > i + 1).then(|| self.offset(i, j - 1)),
                    Direction::NonIncreasing => (j + 1 < n).then(|| self.offset(i, j + 1)),
                };
                // column chains are non-decreasing in both spaces
                let col_prev = (i > 0).then(|| self.offset(i - 1, j));
                for p in row_prev.into_iter().chain(col_prev) {
                    upper[o] = upper[o].max(upper[p]);
                }
            }
        }
        for i in (0..n).rev() {
            let cols: Vec<usize> = match chains.row {
                Direction::NonDecreasing => (i + 1..n).rev().collect(),
                Direction::NonIncreasing => (i + 1..n).collect(),
            };
            for j in cols {
                let o = self.offset(i, j);
                let row_next = match chains.row {
                    Direction::NonDecreasing => (j + 1 < n).then(|| self.offset(i, j + 1)),
                    Direction::NonIncreasing => (j > i + 1).then(|| self.offset(i, j - 1)),
                };
                let col_next = (i + 1 < j).then(|| self.offset(i + 1, j));
                for s in row_next.into_iter().chain(col_next) {
                    lower[o] = lower[o].min(lower[s]);
                }
            }
        }
        for ((v, u), l) in x.iter_mut().zip(&upper).zip(&lower) {
            *v = 0.5 * (u + l);
        }
    }
}

/// Cone values, sweeps or splits used, and the last change or repair.
type ConeOutcome = (Vec<f64>, usize, f64);

/// Projects onto the monotone cone only (no box). On non-convergence the
/// error carries the last iterate.
fn project_cone(
    field: &UpperTriangleField,
    chains: ChainSystem,
    opts: ProjectionOptions,
) -> std::result::Result<ConeOutcome, ConeOutcome> {
    let n = field.n;
    let layout = Layout::new(n);
    let m = field.len();
    let mut x = field.values.clone();
    if m <= 1 {
        return Ok((x, 0, 0.0));
    }
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut buf = Vec::with_capacity(n);
    let mut delta = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        for k in 0..m {
            y[k] = x[k] + p[k];
        }
        layout.project_rows(&mut y, chains.row);
        for k in 0..m {
            p[k] += x[k] - y[k];
            z[k] = y[k] + q[k];
        }
        layout.project_columns(&mut z, chains.column, &mut buf);
        delta = 0.0;
        for k in 0..m {
            q[k] += y[k] - z[k];
            delta = delta.max((z[k] - x[k]).abs());
        }
        std::mem::swap(&mut x, &mut z);
        if delta <= opts.tol {
            if max_chain_violation(&layout, &x, chains) > 0.0 {
                layout.polish(&mut x, chains);
            }
            return Ok((x, iter, delta));
        }
    }
    Err((x, opts.max_iters, delta))
}

fn max_chain_violation(layout: &Layout, x: &[f64], chains: ChainSystem) -> f64 {
    let n = layout.n;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = x[layout.offset(i, j)];
            if j + 1 < n {
                worst = worst.max(chains.row.violation(v, x[layout.offset(i, j + 1)]));
            }
            if i + 1 < j {
                worst = worst.max(chains.column.violation(v, x[layout.offset(i + 1, j)]));
            }
        }
    }
    worst
}

/// Exact cone projection by recursive splitting.
///
/// For a block `S` with mean `c`, the cells of `S` whose projected value
/// exceeds `c` form an upper set `U` of `S` maximising `sum_{U} (y - c)`.
/// If no upper set has positive gain the block is a level set and takes the
/// value `c`; otherwise `U` and `S \ U` are solved independently.
fn partition_cone(field: &UpperTriangleField, kind: Kind) -> ConeOutcome {
    let n = field.n;
    let m = field.len();
    let y = &field.values;
    let mut out = vec![0.0; m];
    let mut cell_row = Vec::with_capacity(m);
    let mut cell_col = Vec::with_capacity(m);
    for i in 0..n {
        for j in i + 1..n {
            cell_row.push(i as u32);
            cell_col.push(j as u32);
        }
    }
    let mut dp = UpperSetSolver::new(kind);
    let mut stack: Vec<Vec<u32>> = Vec::new();
    if m > 0 {
        stack.push((0..m as u32).collect());
    }
    let mut splits = 0;
    let mut in_upper = Vec::new();
    while let Some(block) = stack.pop() {
        let first = y[block[0] as usize];
        if block.iter().all(|&k| y[k as usize] == first) {
            for &k in &block {
                out[k as usize] = first;
            }
            continue;
        }
        let mean = block.iter().map(|&k| y[k as usize]).sum::<f64>() / block.len() as f64;
        splits += 1;
        let cells = block.iter().map(|&k| {
            (
                cell_row[k as usize],
                cell_col[k as usize],
                y[k as usize] - mean,
            )
        });
        let scale: f64 = block.iter().map(|&k| (y[k as usize] - mean).abs()).sum();
        let gain = dp.solve(cells, &mut in_upper);
        if gain <= 1e-13 * scale {
            for &k in &block {
                out[k as usize] = mean;
            }
            continue;
        }
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for (&k, &up) in block.iter().zip(&in_upper) {
            if up {
                upper.push(k);
            } else {
                lower.push(k);
            }
        }
        debug_assert!(!upper.is_empty() && !lower.is_empty());
        stack.push(lower);
        stack.push(upper);
    }
    let layout = Layout::new(n);
    let chains = ChainSystem::for_kind(kind);
    let residual = max_chain_violation(&layout, &out, chains);
    if residual > 0.0 {
        layout.polish(&mut out, chains);
    }
    (out, splits, residual)
}

/// Best upper set of a block of triangle cells under the order of `kind`.
///
/// In the tournament order a cell's upper neighbours are one step left in
/// its row and one step down its column, so an upper set meets each row in
/// a prefix `lo_i ..= b_i` with `b_i` non-decreasing down the rows. In the
/// graph order the neighbours are one step right and one step down, so each
/// row meets it in a suffix `a_i ..= hi`, where `a_i <= max(a_{i-1}, lo_i)`.
/// Both are solved row by row over the bounding box of the block.
struct UpperSetSolver {
    kind: Kind,
    weights: Vec<f64>,
    best: Vec<f64>,
    choice: Vec<usize>,
}

impl UpperSetSolver {
    fn new(kind: Kind) -> Self {
        UpperSetSolver {
            kind,
            weights: Vec::new(),
            best: Vec::new(),
            choice: Vec::new(),
        }
    }

    /// Returns the best gain and marks membership of each cell, in input
    /// order, in `in_upper`.
    fn solve(
        &mut self,
        cells: impl Iterator<Item = (u32, u32, f64)> + Clone,
        in_upper: &mut Vec<bool>,
    ) -> f64 {
        let (mut ilo, mut ihi, mut jlo, mut jhi) = (u32::MAX, 0, u32::MAX, 0);
        for (i, j, _) in cells.clone() {
            ilo = ilo.min(i);
            ihi = ihi.max(i);
            jlo = jlo.min(j);
            jhi = jhi.max(j);
        }
        let (ilo, ihi, jlo, jhi) = (ilo as usize, ihi as usize, jlo as usize, jhi as usize);
        let rows = ihi - ilo + 1;
        let cols = jhi - jlo + 1;
        // one extra slot per row for the empty choice
        let width = cols + 1;
        self.weights.clear();
        self.weights.resize(rows * cols, 0.0);
        for (i, j, w) in cells.clone() {
            self.weights[(i as usize - ilo) * cols + (j as usize - jlo)] = w;
        }
        self.best.clear();
        self.best.resize(rows * width, f64::NEG_INFINITY);
        self.choice.clear();
        self.choice.resize(rows, 0);
        // first slot of row r that is a legal choice
        let start = |r: usize| (ilo + r + 1).max(jlo) - jlo;
        let gain = match self.kind {
            Kind::Tournament => self.solve_prefix(rows, cols, width, start),
            Kind::Graph => self.solve_suffix(rows, cols, width, start),
        };
        in_upper.clear();
        for (i, j, _) in cells {
            let r = i as usize - ilo;
            let c = j as usize - jlo;
            let up = match self.kind {
                // slot t keeps the columns start..t
                Kind::Tournament => c < self.choice[r],
                // slot t keeps the columns t..cols
                Kind::Graph => c >= self.choice[r],
            };
            in_upper.push(up);
        }
        gain
    }

    /// Slot `t` of row `r` means the prefix of columns `start(r)..t`.
    fn solve_prefix(
        &mut self,
        rows: usize,
        cols: usize,
        width: usize,
        start: impl Fn(usize) -> usize,
    ) -> f64 {
        for r in 0..rows {
            let s = start(r);
            let w = &self.weights[r * cols..(r + 1) * cols];
            let (done, rest) = self.best.split_at_mut(r * width);
            let here = &mut rest[..width];
            let prev = (r > 0).then(|| &done[(r - 1) * width..r * width]);
            let mut acc = 0.0;
            let mut run = f64::NEG_INFINITY;
            if let Some(prev) = prev {
                for &v in &prev[..s] {
                    run = run.max(v);
                }
            } else {
                run = 0.0;
            }
            for t in s..width {
                if t > s {
                    acc += w[t - 1];
                }
                if let Some(prev) = prev {
                    run = run.max(prev[t]);
                }
                here[t] = acc + run;
            }
        }
        let last = &self.best[(rows - 1) * width..rows * width];
        let (mut t, gain) = argmax(last, 0, width);
        for r in (0..rows).rev() {
            self.choice[r] = t;
            if r > 0 {
                let prev = &self.best[(r - 1) * width..r * width];
                t = argmax(prev, 0, t + 1).0;
            }
        }
        gain
    }

    /// Slot `t` of row `r` means the suffix of columns `t..cols`; `t = cols`
    /// is empty and `t = start(r)` is the whole row.
    fn solve_suffix(
        &mut self,
        rows: usize,
        cols: usize,
        width: usize,
        start: impl Fn(usize) -> usize,
    ) -> f64 {
        let mut suffix_max = vec![f64::NEG_INFINITY; width + 1];
        for r in 0..rows {
            let s = start(r);
            let w = &self.weights[r * cols..(r + 1) * cols];
            let (done, rest) = self.best.split_at_mut(r * width);
            let here = &mut rest[..width];
            if r == 0 {
                suffix_max.iter_mut().for_each(|v| *v = 0.0);
            } else {
                let prev = &done[(r - 1) * width..r * width];
                suffix_max[width] = f64::NEG_INFINITY;
                for t in (0..width).rev() {
                    suffix_max[t] = suffix_max[t + 1].max(prev[t]);
                }
            }
            let mut acc = 0.0;
            for t in (s..width).rev() {
                if t < cols {
                    acc += w[t];
                }
                // a full row leaves the previous row unconstrained
                let link = if t == s { suffix_max[0] } else { suffix_max[t] };
                here[t] = acc + link;
            }
        }
        let last = &self.best[(rows - 1) * width..rows * width];
        let (mut t, gain) = argmax(last, 0, width);
        for r in (0..rows).rev() {
            self.choice[r] = t;
            if r > 0 {
                let prev = &self.best[(r - 1) * width..r * width];
                let from = if t == start(r) { 0 } else { t };
                t = argmax(prev, from, width).0;
            }
        }
        gain
    }
}

/// First index of the largest entry of `v[from..to]`.
fn argmax(v: &[f64], from: usize, to: usize) -> (usize, f64) {
    let mut best = (from, v[from]);
    for (t, &x) in v.iter().enumerate().take(to).skip(from + 1) {
        if x > best.1 {
            best = (t, x);
        }
    }
    best
}

/// Euclidean projection of `field` onto the sorted space of `kind`.
///
/// Cone projection by the method in `opts`, followed by clipping to
/// `[0, 1/2]` (tournament) or `[0, 1]` (graph). With Dykstra this fails with
/// [`Error::ConvergenceFailure`] if `max_iters` sweeps do not bring the
/// per-sweep change under `tol`.
pub fn project_triangle(
    field: &UpperTriangleField,
    kind: Kind,
    opts: ProjectionOptions,
) -> Result<(UpperTriangleField, ProjectionDiagnostics)> {
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("projection input must be finite"));
    }
    let (mut x, iterations, final_delta) = match opts.method {
        ProjectionMethod::Partition => partition_cone(field, kind),
        ProjectionMethod::Dykstra => {
            if !(opts.tol > 0.0) || opts.max_iters == 0 {
                return Err(Error::invalid("projection needs tol > 0 and max_iters > 0"));
            }
            let chains = ChainSystem::for_kind(kind);
            match project_cone(field, chains, opts) {
                Ok(done) => done,
                Err((_, iterations, final_delta)) => {
                    return Err(Error::ConvergenceFailure(ProjectionDiagnostics {
                        iterations,
                        final_delta,
                        clipped_cells: 0,
                    }))
                }
            }
        }
    };
    let hi = kind.upper_bound();
    let mut clipped_cells = 0;
    for v in x.iter_mut() {
        let c = v.clamp(0.0, hi);
        if c != *v {
            clipped_cells += 1;
            *v = c;
        }
    }
    let out = UpperTriangleField {
        n: field.n,
        values: x,
    };
    debug_assert!(out.max_violation(kind) <= MEMBERSHIP_TOL);
    Ok((
        out,
        ProjectionDiagnostics {
            iterations,
            final_delta,
            clipped_cells,
        },
    ))
}

/// Rebuilds the full matrix: zero diagonal, lower triangle mirrored per `kind`.
pub fn assemble_estimate(projected: &UpperTriangleField, kind: Kind) -> Result<ProbabilityMatrix> {
    let violation = projected.max_violation(kind);
    if violation > MEMBERSHIP_TOL {
        return Err(Error::invalid(format!(
            "triangle is infeasible for {kind} (violation {violation:e})"
        )));
    }
    ProbabilityMatrix::from_upper(kind, projected.n, |i, j| projected.get(i, j))
}
