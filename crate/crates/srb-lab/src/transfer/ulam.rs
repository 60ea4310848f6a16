//! Ulam discretization of the transfer operator and its diagnostics.
//!
//! Row i of the operator distributes the mass of cell i over image cells by
//! pushing it one step through the map: exactly in the fiber coordinate
//! (closed-form push-forward of the quadratic) and by stratified θ samples
//! in the base. This dual (push-forward) construction never evaluates
//! 1/|det Dφ|, so the critical line x = 0 needs no special treatment.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{reduce_mod1, MapVariant, SkewMapParams};
use crate::transfer::grid::{discrete_variation, Grid, GridDensity};
use crate::util;

/// Sparse row-stochastic matrix over grid cells, stored twice: CSR for row
/// access and its transpose for the density push-forward.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    pub grid: Grid,
    pub subsamples: usize,
    pub seed: u64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    t_row_ptr: Vec<usize>,
    t_cols: Vec<u32>,
    t_vals: Vec<f64>,
}

impl UlamOperator {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn n_rows(&self) -> usize {
        self.grid.cells()
    }

    /// One push-forward step: out_j = Σ_i f_i P_ij. Mass-preserving up to
    /// row-sum rounding. Parallel over output cells with fixed-order sums.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n_rows();
        assert_eq!(values.len(), n);
        (0..n)
            .into_par_iter()
            .map(|j| {
                let span = self.t_row_ptr[j]..self.t_row_ptr[j + 1];
                let mut acc = 0.0;
                for (&i, &w) in self.t_cols[span.clone()].iter().zip(&self.t_vals[span]) {
                    acc += values[i as usize] * w;
                }
                acc
            })
            .collect()
    }

    pub fn apply_density(&self, d: &GridDensity) -> Result<GridDensity> {
        if d.grid != self.grid {
            return Err(Error::GridMismatch(
                "density grid differs from operator grid".into(),
            ));
        }
        Ok(GridDensity {
            grid: self.grid,
            values: self.apply(&d.values),
        })
    }

    pub fn row_sum_defect(&self) -> f64 {
        (0..self.n_rows())
            .map(|i| (self.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds the Ulam operator. The skew-product structure makes the fiber
/// push-forward of a cell computable in closed form, so only the base
/// coordinate is sampled: each cell takes `subsamples` stratified jittered
/// θ points, and at each the uniform x-mass of the cell is spread exactly
/// over the image bins through x ↦ a(θ)−x² (preimage-length weights). The
/// two test variants have fully exact rows. Deterministic given the seed;
/// rows use derived seeds so the parallel schedule does not matter.
pub fn build_ulam(
    params: &SkewMapParams,
    grid: Grid,
    subsamples: usize,
    seed: u64,
) -> Result<UlamOperator> {
    if subsamples == 0 {
        return Err(Error::InvalidArgument("subsamples must be >= 1".into()));
    }
    if grid.domain != params.domain {
        return Err(Error::GridMismatch(
            "grid domain differs from map fiber interval".into(),
        ));
    }
    if params.variant == MapVariant::Viana
        && !Grid::is_power_of(grid.n_theta, params.degree as usize)
    {
        return Err(Error::InvalidArgument(format!(
            "n_theta = {} must be a power of the circle degree d = {} so that \
             grid columns align with the Markov partition of S^1",
            grid.n_theta, params.degree
        )));
    }

    let n = grid.cells();
    let rows: Vec<Result<Vec<(u32, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| sample_row(params, &grid, i, subsamples, seed))
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row? {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    // Transpose (CSR of Pᵀ) for the push-forward.
    let mut t_counts = vec![0usize; n];
    for &c in &cols {
        t_counts[c as usize] += 1;
    }
    let mut t_row_ptr = vec![0usize; n + 1];
    for j in 0..n {
        t_row_ptr[j + 1] = t_row_ptr[j] + t_counts[j];
    }
    let mut t_cols = vec![0u32; cols.len()];
    let mut t_vals = vec![0.0f64; cols.len()];
    let mut cursor = t_row_ptr.clone();
    for i in 0..n {
        for idx in row_ptr[i]..row_ptr[i + 1] {
            let j = cols[idx] as usize;
            t_cols[cursor[j]] = i as u32;
            t_vals[cursor[j]] = vals[idx];
            cursor[j] += 1;
        }
    }

    Ok(UlamOperator {
        grid,
        subsamples,
        seed,
        row_ptr,
        cols,
        vals,
        t_row_ptr,
        t_cols,
        t_vals,
    })
}

/// Sorted sparse row under construction; merges repeated columns.
struct RowAccumulator(Vec<(u32, f64)>);

impl RowAccumulator {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn add(&mut self, col: u32, w: f64) {
        if w <= 0.0 {
            return;
        }
        match self.0.binary_search_by_key(&col, |e| e.0) {
            Ok(pos) => self.0[pos].1 += w,
            Err(pos) => self.0.insert(pos, (col, w)),
        }
    }
}

/// Distributes the uniform mass of [a, b] over the n cells of S¹ = [0, 1)
/// by exact overlap lengths (the interval may wrap any number of times).
fn spread_mod1(a: f64, b: f64, n: usize, mut sink: impl FnMut(usize, f64)) {
    let len = b - a;
    debug_assert!(len > 0.0);
    let lo = (a * n as f64).floor() as i64;
    let hi = (b * n as f64).ceil() as i64;
    for c in lo..hi {
        let cl = c as f64 / n as f64;
        let ch = (c + 1) as f64 / n as f64;
        let overlap = b.min(ch) - a.max(cl);
        if overlap > 0.0 {
            sink((c.rem_euclid(n as i64)) as usize, overlap / len);
        }
    }
}

/// Pushes the uniform mass of the fiber segment [xl, xh] through x ↦ a − x²
/// and distributes it over the grid's x-bins in closed form. On each sign
/// half the map is monotone with preimage radius r(t) = √(a − t), so the
/// mass landing in [c_lo, c_hi] is (r(c_lo) − r(c_hi)) / (xh − xl).
fn quadratic_spread(a: f64, xl: f64, xh: f64, grid: &Grid, mut sink: impl FnMut(usize, f64)) {
    let width = xh - xl;
    let dx = grid.domain.len() / grid.n_x as f64;
    let mut piece = |u: f64, v: f64| {
        // |x| ∈ [u, v] ⇒ image [a − v², a − u²].
        if v - u <= 0.0 {
            return;
        }
        let (ilo, ihi) = (a - v * v, a - u * u);
        let bin = |t: f64| ((t - grid.domain.lo) / dx).floor() as i64;
        let jlo = bin(ilo).max(0) as usize;
        let jhi = (bin(ihi) as usize).min(grid.n_x - 1);
        for j in jlo..=jhi {
            let bl = grid.domain.lo + j as f64 * dx;
            let cl = ilo.max(bl);
            let ch = ihi.min(bl + dx);
            if ch > cl {
                let r_hi = (a - cl).max(0.0).sqrt();
                let r_lo = (a - ch).max(0.0).sqrt();
                sink(j, (r_hi - r_lo) / width);
            }
        }
    };
    if xh <= 0.0 {
        piece(-xh, -xl);
    } else if xl >= 0.0 {
        piece(xl, xh);
    } else {
        piece(0.0, -xl);
        piece(0.0, xh);
    }
}

fn sample_row(
    params: &SkewMapParams,
    grid: &Grid,
    cell: usize,
    subsamples: usize,
    seed: u64,
) -> Result<Vec<(u32, f64)>> {
    let (it, ix) = grid.split_index(cell);
    let dt = 1.0 / grid.n_theta as f64;
    let dx = grid.domain.len() / grid.n_x as f64;
    let (t0, t1) = (it as f64 * dt, (it + 1) as f64 * dt);
    let (xl, xh) = (
        grid.domain.lo + ix as f64 * dx,
        grid.domain.lo + (ix + 1) as f64 * dx,
    );
    let mut acc = RowAccumulator::new();
    match params.variant {
        MapVariant::TestLinear => acc.add(cell as u32, 1.0),
        MapVariant::TestDoublingProduct => {
            // Exact outer product of the two circle-doubling spreads.
            let mut ts: Vec<(usize, f64)> = Vec::new();
            spread_mod1(2.0 * t0, 2.0 * t1, grid.n_theta, |j, w| ts.push((j, w)));
            let mut xs: Vec<(usize, f64)> = Vec::new();
            spread_mod1(2.0 * xl, 2.0 * xh, grid.n_x, |j, w| xs.push((j, w)));
            for &(jt, wt) in &ts {
                for &(jx, wx) in &xs {
                    acc.add((jt * grid.n_x + jx) as u32, wt * wx);
                }
            }
        }
        MapVariant::Viana => {
            // θ is sampled (a(θ) varies inside the cell); the fiber
            // push-forward at each θ is exact.
            let mut rng = util::rng_for(seed, cell as u64);
            let wt = 1.0 / subsamples as f64;
            for s in 0..subsamples {
                let theta = t0 + (s as f64 + rng.random::<f64>()) * wt * (t1 - t0);
                let a = params.a(theta);
                let tp = reduce_mod1(params.degree as f64 * theta);
                let jt = ((tp * grid.n_theta as f64) as usize).min(grid.n_theta - 1);
                quadratic_spread(a, xl, xh, grid, |jx, wx| {
                    acc.add((jt * grid.n_x + jx) as u32, wt * wx);
                });
            }
        }
    }
    Ok(acc.0)
}

#[derive(Clone, Debug)]
pub struct InvariantDensity {
    pub density: GridDensity,
    /// ‖Lρ − ρ‖₁ of the returned density.
    pub residual: f64,
    /// Total operator applications spent.
    pub iterations: usize,
}

/// Window length of the restarted Cesàro iteration.
const CESARO_WINDOW: usize = 24;

/// Invariant density by restarted Cesàro averaging: each stage replaces the
/// current iterate with the Cesàro average of its next `CESARO_WINDOW`
/// push-forwards (averaging handles peripheral spectrum on the unit circle),
/// until ‖Lρ − ρ‖₁ < tol.
pub fn invariant_density(op: &UlamOperator, tol: f64, max_iter: usize) -> Result<InvariantDensity> {
    let n = op.n_rows();
    let mut cur = vec![1.0f64; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let area = op.grid.cell_area();
    while iterations < max_iter {
        // Cesàro stage: avg = (1/W) Σ_{j<W} L^j cur.
        let mut avg = cur.clone();
        let mut iter = cur;
        for _ in 1..CESARO_WINDOW {
            iter = op.apply(&iter);
            iterations += 1;
            for (a, g) in avg.iter_mut().zip(&iter) {
                *a += g;
            }
            if iterations >= max_iter {
                break;
            }
        }
        let mass: f64 = avg.iter().sum::<f64>() * area;
        for a in &mut avg {
            *a /= mass;
        }
        let next = op.apply(&avg);
        iterations += 1;
        residual = avg
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * area;
        cur = avg;
        if residual < tol {
            let density = GridDensity::from_values(op.grid, cur)?;
            return Ok(InvariantDensity {
                density,
                residual,
                iterations,
            });
        }
    }
    Err(Error::NoConvergence { max_iter, residual })
}

/// Invariant density computed on an x-refined grid and averaged back onto
/// the requested grid. The closed-form fiber push-forward makes rows exact
/// in x, so refining the fiber partition sharpens the inverse-square-root
/// peaks of the density (images of the critical line) that a coarse
/// partition smears; the base partition is unchanged because the θ-cells
/// already align with the Markov partition of θ ↦ dθ.
pub fn refined_invariant_density(
    params: &SkewMapParams,
    grid: Grid,
    subsamples: usize,
    x_refine: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<InvariantDensity> {
    if x_refine == 0 {
        return Err(Error::InvalidArgument("x_refine must be >= 1".into()));
    }
    let fine = Grid::new(grid.n_theta, grid.n_x * x_refine, grid.domain)?;
    let op = build_ulam(params, fine, subsamples, seed)?;
    let inv = invariant_density(&op, tol, max_iter)?;
    let mut values = vec![0.0; grid.cells()];
    for (idx, v) in inv.density.values.iter().enumerate() {
        let (it, ix) = fine.split_index(idx);
        values[it * grid.n_x + ix / x_refine] += v / x_refine as f64;
    }
    Ok(InvariantDensity {
        density: GridDensity::from_values(grid, values)?,
        residual: inv.residual,
        iterations: inv.iterations,
    })
}

/// Fitted constants of the empirical Lasota–Yorke inequality
/// var(Lf) ≤ λ̂·var(f) + K̂₂·‖f‖₁.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LyDiagnostics {
    pub lambda_hat: f64,
    pub k2_hat: f64,
    pub n_samples: usize,
}

pub fn lasota_yorke_diagnostic(
    op: &UlamOperator,
    test_densities: &[GridDensity],
) -> Result<LyDiagnostics> {
    if test_densities.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two test densities for the Lasota-Yorke fit".into(),
        ));
    }
    // Least squares for y = λ·x + K₂·z with x = var(f), z = ‖f‖₁, y = var(Lf).
    let (mut sxx, mut sxz, mut szz, mut sxy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for f in test_densities {
        let lf = op.apply_density(f)?;
        let x = discrete_variation(f);
        let z = crate::transfer::grid::lp_norm(f, 1.0)?;
        let y = discrete_variation(&lf);
        sxx += x * x;
        sxz += x * z;
        szz += z * z;
        sxy += x * y;
        szy += z * y;
    }
    let det = sxx * szz - sxz * sxz;
    if det.abs() < 1e-10 * (sxx * szz).max(1e-30) || sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "test densities do not spread the (var, L1) design".into(),
        ));
    }
    let lambda = (szz * sxy - sxz * szy) / det;
    let k2 = (sxx * szy - sxz * sxy) / det;
    Ok(LyDiagnostics {
        lambda_hat: lambda.max(0.0),
        k2_hat: k2,
        n_samples: test_densities.len(),
    })
}

/// |∫(Lf)·g dm − ∫ f·(g∘φ) dm| where g is read as a piecewise-constant
/// function. The left side uses an Ulam operator with `samples` subsamples;
/// the right side evaluates g∘φ at cell centers, so the residual measures
/// the discretization error, O(cell diameter).
pub fn duality_check(
    params: &SkewMapParams,
    grid: Grid,
    f: &GridDensity,
    g: &GridDensity,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if f.grid != grid || g.grid != grid {
        return Err(Error::GridMismatch(
            "duality check needs a common grid".into(),
        ));
    }
    let op = build_ulam(params, grid, samples, seed)?;
    let lf = op.apply(&f.values);
    let area = grid.cell_area();
    let lhs: f64 = lf.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * area;
    let mut rhs = 0.0;
    for idx in 0..grid.cells() {
        let (it, ix) = grid.split_index(idx);
        let img = params.eval(grid.center(it, ix))?;
        rhs += f.values[idx] * g.values[grid.index_of(img)];
    }
    rhs *= area;
    Ok((lhs - rhs).abs())
}

/// ‖L₁f − L₀f‖₁ with both operators built from the same seed and subsample
/// layout, so the difference isolates the map perturbation.
pub fn transfer_perturbation_residual(
    params0: &SkewMapParams,
    params1: &SkewMapParams,
    grid: Grid,
    f: &GridDensity,
    subsamples: usize,
    seed: u64,
) -> Result<f64> {
    if f.grid != grid {
        return Err(Error::GridMismatch(
            "density grid differs from requested grid".into(),
        ));
    }
    let op0 = build_ulam(params0, grid, subsamples, seed)?;
    let op1 = build_ulam(params1, grid, subsamples, seed)?;
    let a = op0.apply(&f.values);
    let b = op1.apply(&f.values);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() * grid.cell_area())
}
